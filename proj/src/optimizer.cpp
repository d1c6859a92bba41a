#include "calibkit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calibkit/errors.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/random.hpp"

namespace calibkit {

OptimizerConfig OptimizerConfig::unit_cube(int dim, std::uint64_t seed) {
    OptimizerConfig c;
    c.lower = Eigen::VectorXd::Zero(dim);
    c.upper = Eigen::VectorXd::Ones(dim);
    c.seed = seed;
    return c;
}

void OptimizerConfig::validate() const {
    if (lower.size() < 1 || lower.size() != upper.size())
        throw ConfigError("optimizer bounds must be non-empty and of equal length");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
            throw ConfigError("optimizer bound " + std::to_string(i + 1) + " must be finite with lo < hi");
    if (pool_rate < 1) throw ConfigError("pool_rate must be >= 1");
    if (population() < 3) throw ConfigError("population pool_rate * dim must be >= 3");
    if (!(radioactivity >= 0.0 && radioactivity <= 1.0)) throw ConfigError("radioactivity must lie in [0, 1]");
    if (!(cross_limit > 0.0)) throw ConfigError("cross_limit must be positive");
    if (budget < population())
        throw ConfigError("budget " + std::to_string(budget) + " is smaller than the population " +
                          std::to_string(population()));
}

namespace {

double sanitize(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

OptimizerResult minimize(const BatchObjective& objective, const OptimizerConfig& config) {
    config.validate();
    const int dim = config.dim();
    const int pop = config.population();
    Rng rng(config.seed);

    OptimizerResult result;
    double best = std::numeric_limits<double>::infinity();
    auto record = [&](const Eigen::MatrixXd& points, Eigen::VectorXd& values) {
        if (values.size() != points.rows()) throw ShapeError("objective returned the wrong number of values");
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            values[i] = sanitize(values[i]);
            if (values[i] < best || result.best_point.size() == 0) {
                best = std::min(best, values[i]);
                result.best_point = points.row(i).transpose();
            }
            result.best_trace.push_back(best);
        }
        result.evaluations += static_cast<int>(values.size());
    };

    Eigen::MatrixXd x(pop, dim);
    for (int i = 0; i < pop; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = rng.uniform(config.lower[j], config.upper[j]);
    Eigen::VectorXd f = objective(x);
    record(x, f);

    Eigen::MatrixXd children;
    while (result.evaluations < config.budget) {
        const int count = std::min(pop, config.budget - result.evaluations);
        children.resize(count, dim);
        for (int i = 0; i < count; ++i) {
            auto a = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(pop - 1)));
            if (a >= i) ++a;
            Eigen::Index b;
            do {
                b = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(pop)));
            } while (b == i || b == a);
            const double step = rng.uniform(0.0, 1.0 / config.cross_limit);
            children.row(i) = x.row(i) + step * (x.row(a) - x.row(b));
            if (rng.uniform() < config.radioactivity) {
                const auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dim)));
                children(i, j) = rng.uniform(config.lower[j], config.upper[j]);
            }
            for (int j = 0; j < dim; ++j) children(i, j) = std::clamp(children(i, j), config.lower[j], config.upper[j]);
        }
        Eigen::VectorXd fc = objective(children);
        record(children, fc);

        // (mu + lambda) truncation; parents win ties. Exact duplicates are
        // admitted only when too few distinct points remain.
        std::vector<int> order(static_cast<std::size_t>(pop + count));
        std::iota(order.begin(), order.end(), 0);
        auto value_of = [&](int k) { return k < pop ? f[k] : fc[k - pop]; };
        auto point_of = [&](int k) { return k < pop ? x.row(k) : children.row(k - pop); };
        std::stable_sort(order.begin(), order.end(), [&](int p, int q) { return value_of(p) < value_of(q); });
        Eigen::MatrixXd nx(pop, dim);
        Eigen::VectorXd nf(pop);
        int filled = 0;
        std::vector<int> duplicates;
        for (int k : order) {
            if (filled == pop) break;
            bool dup = false;
            for (int q = 0; q < filled && !dup; ++q) dup = nx.row(q) == point_of(k);
            if (dup) {
                duplicates.push_back(k);
                continue;
            }
            nx.row(filled) = point_of(k);
            nf[filled++] = value_of(k);
        }
        for (std::size_t u = 0; filled < pop; ++u) {
            nx.row(filled) = point_of(duplicates[u]);
            nf[filled++] = value_of(duplicates[u]);
        }
        x = std::move(nx);
        f = std::move(nf);
    }
    result.best_value = best;
    return result;
}

OptimizerResult minimize(const Objective& objective, const OptimizerConfig& config) {
    const int jobs = config.jobs;
    return minimize(
        BatchObjective([&](const Eigen::MatrixXd& points) {
            Eigen::VectorXd v(points.rows());
            parallel_for(static_cast<std::size_t>(points.rows()), jobs, [&](std::size_t i) {
                v[static_cast<Eigen::Index>(i)] = objective(points.row(static_cast<Eigen::Index>(i)).transpose());
            });
            return v;
        }),
        config);
}

SurrogateFit fit_surrogate_response(const SurrogateBank& bank, const Eigen::VectorXd& observed,
                                    const OptimizerConfig& config) {
    OptimizerResult r;
    switch (bank.strategy.family) {
    case StrategyFamily::Inverse:
        throw ConfigError(to_string(bank.strategy.id) +
                          " is an inverse strategy; evaluate its nets directly instead of optimizing");
    case StrategyFamily::Forward: {
        const auto& comps = bank_components(bank);
        if (observed.size() != static_cast<Eigen::Index>(comps.size()))
            throw ShapeError("observed values (" + std::to_string(observed.size()) + ") differ from the bank's " +
                             std::to_string(comps.size()) + " components");
        r = minimize(BatchObjective([&](const Eigen::MatrixXd& pts) {
                         const Eigen::MatrixXd pred = predict_forward(bank, pts);
                         return Eigen::VectorXd((pred.rowwise() - observed.transpose()).rowwise().squaredNorm());
                     }),
                     config);
        break;
    }
    case StrategyFamily::Error:
        r = minimize(BatchObjective([&](const Eigen::MatrixXd& pts) { return predict_error(bank, pts); }), config);
        break;
    }
    if (r.best_point.size() != 4) throw ShapeError("surrogate fit needs a 4-dimensional search box");
    return {StandardizedParams(Vector4(r.best_point)), r.best_value, r.evaluations};
}

SurrogateFit direct_calibrate(const Eigen::VectorXd& observed, int error_id, const TimeGrid& grid,
                              const OptimizerConfig& config, const ThermalConditions& cond) {
    if (observed.size() != grid.size()) throw ShapeError("observed curve must be resampled onto the full grid");
    if (error_id != 1 && error_id != 2) throw ConfigError("error function must be 1 or 2");
    const OptimizerResult r = minimize(
        Objective([&](const Eigen::VectorXd& p) {
            const HydrationCurve c = simulate(StandardizedParams(Vector4(p)), grid, cond);
            return error_function(error_id, c.alpha, observed);
        }),
        config);
    if (r.best_point.size() != 4) throw ShapeError("direct calibration needs a 4-dimensional search box");
    return {StandardizedParams(Vector4(r.best_point)), r.best_value, r.evaluations};
}

}  // namespace calibkit
