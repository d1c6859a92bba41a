#include "calibkit/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "calibkit/csv.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/random.hpp"

namespace calibkit {

void ObservedCurve::validate() const {
    const std::string who = label.empty() ? "observed curve" : "observed curve '" + label + "'";
    if (times.size() == 0) throw DataError(who + " is empty");
    if (times.size() != values.size()) throw DataError(who + ": times and values differ in length");
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
            throw DataError(who + ": non-finite entry at row " + std::to_string(i + 1));
        if (i > 0 && !(times[i] > times[i - 1]))
            throw DataError(who + ": times not strictly increasing at row " + std::to_string(i + 1));
    }
    if (!(times[0] + time_shift > 0.0))
        throw DataError(who + ": corrected time " + std::to_string(times[0] + time_shift) + " h is not positive");
}

ObservedCurve read_observed(const std::filesystem::path& path, double time_shift, std::optional<double> q_pot,
                            std::string label) {
    const csv::Table table = csv::read(path);
    ObservedCurve obs;
    obs.time_shift = time_shift;
    obs.label = label.empty() ? path.stem().string() : std::move(label);
    obs.times = table.values.col(table.column("time_h"));
    const auto has = [&](const char* name) {
        return std::find(table.header.begin(), table.header.end(), name) != table.header.end();
    };
    if (has("alpha")) {
        obs.values = table.values.col(table.column("alpha"));
    } else if (has("heat_J_per_g")) {
        if (!q_pot) throw ConfigError(path.string() + ": heat input needs q_pot");
        obs.values = heat_to_alpha(table.values.col(table.column("heat_J_per_g")), *q_pot).alpha;
    } else {
        throw ParseError(path.string() + ": expected an 'alpha' or 'heat_J_per_g' column");
    }
    obs.validate();
    return obs;
}

void write_observed(const std::filesystem::path& path, const ObservedCurve& curve) {
    csv::write_curve(path, curve.times, curve.values);
}

Resampled resample(const ObservedCurve& obs, const Eigen::VectorXd& query_times) {
    obs.validate();
    if (obs.times.size() < 2) throw DataError("resampling needs at least 2 observations");
    const Eigen::VectorXd lx = obs.corrected_times().array().log10();
    const Eigen::Index n = lx.size();
    Resampled out;
    out.values.resize(query_times.size());
    for (Eigen::Index i = 0; i < query_times.size(); ++i) {
        if (!(query_times[i] > 0.0)) throw DomainError("query times must be positive");
        const double q = std::log10(query_times[i]);
        if (q < lx[0]) {
            out.values[i] = obs.values[0];
            ++out.before_first;
        } else if (q >= lx[n - 1]) {
            out.values[i] = obs.values[n - 1];
            if (q > lx[n - 1]) ++out.after_last;
        } else {
            const auto hi = std::upper_bound(lx.data(), lx.data() + n, q) - lx.data();
            const auto lo = hi - 1;
            const double w = (q - lx[lo]) / (lx[hi] - lx[lo]);
            out.values[i] = obs.values[lo] + w * (obs.values[hi] - obs.values[lo]);
        }
    }
    if (out.before_first > 0)
        out.warning = std::to_string(out.before_first) + " query time(s) precede the first observation at " +
                      std::to_string(obs.times[0] + obs.time_shift) + " h; held at the first observed value";
    return out;
}

Resampled resample_to_grid(const ObservedCurve& obs, const TimeGrid& grid, const std::vector<int>& indices) {
    Eigen::VectorXd q(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int k = indices[i];
        if (k < 1 || k > grid.size()) throw ShapeError("grid component " + std::to_string(k) + " out of range");
        q[static_cast<Eigen::Index>(i)] = grid.at_component(k);
    }
    return resample(obs, q);
}

Resampled resample_to_grid(const ObservedCurve& obs, const TimeGrid& grid) { return resample(obs, grid.times()); }

Vector4 parameter_errors(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth, const Vector4& lo,
                         const Vector4& hi) {
    if (estimated.rows() != truth.rows() || estimated.cols() != 4 || truth.cols() != 4)
        throw ShapeError("parameter_errors: expected two N x 4 matrices");
    if (estimated.rows() == 0) throw ShapeError("parameter_errors: no samples");
    if (!((hi - lo).array() > 0.0).all()) throw ConfigError("parameter_errors: degenerate training spread");
    const Eigen::RowVectorXd mean_abs = (estimated - truth).cwiseAbs().colwise().mean();
    return 100.0 * (mean_abs.transpose().array() / (hi - lo).array()).matrix();
}

double response_error(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth, double spread) {
    if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
        throw ShapeError("response_error: shapes differ");
    if (estimated.size() == 0) throw ShapeError("response_error: no values");
    if (!(spread > 0.0)) throw ConfigError("response_error: degenerate response spread");
    return 100.0 * (estimated - truth).cwiseAbs().mean() / spread;
}

Eigen::VectorXd resimulate(const StandardizedParams& p_hat, const TimeGrid& grid, const ThermalConditions& cond,
                           bool& clamped) {
    clamped = false;
    if (!p_hat.in_cube()) {
        try {
            return simulate(destandardize_extrapolated(p_hat), grid, cond).alpha;
        } catch (const DomainError&) {
        } catch (const NumericalError&) {
        }
        clamped = true;
        return simulate(StandardizedParams(Vector4(p_hat.p.cwiseMax(0.0).cwiseMin(1.0))), grid, cond).alpha;
    }
    return simulate(p_hat, grid, cond).alpha;
}

namespace {

double bank_spread(const SurrogateBank& bank) {
    const double s = bank.response_max - bank.response_min;
    if (!(s > 0.0)) throw ConfigError("bank has a degenerate response spread");
    return s;
}

// Identifies p for one full-grid curve (values on every grid point).
StandardizedParams identify(const SurrogateBank& bank, const Eigen::VectorXd& full_curve,
                            const OptimizerConfig& opt, double& objective) {
    switch (bank.strategy.family) {
    case StrategyFamily::Inverse: return predict_parameters(bank, full_curve);
    case StrategyFamily::Forward: {
        const auto& comps = bank_components(bank);
        Eigen::VectorXd obs(static_cast<Eigen::Index>(comps.size()));
        for (std::size_t c = 0; c < comps.size(); ++c) obs[static_cast<Eigen::Index>(c)] = full_curve[comps[c] - 1];
        const SurrogateFit fit = fit_surrogate_response(bank, obs, opt);
        objective = fit.delta;
        return fit.p;
    }
    case StrategyFamily::Error: {
        const SurrogateFit fit = fit_surrogate_response(bank, full_curve, opt);
        objective = fit.delta;
        return fit.p;
    }
    }
    return {};
}

}  // namespace

VerificationReport verify(const SurrogateBank& bank, const Eigen::MatrixXd& design_test,
                          const Eigen::MatrixXd& bundle_test, const CalibrationSettings& settings) {
    if (bank.strategy.family == StrategyFamily::Error)
        throw ConfigError(to_string(bank.strategy.id) +
                          " banks are trained against a single observed curve; use validate instead");
    if (design_test.rows() != bundle_test.rows() || design_test.cols() != 4)
        throw ShapeError("test design must be N x 4 with one bundle row per point");
    if (bundle_test.cols() != bank.grid_times.size()) throw ShapeError("test bundle does not match the bank's grid");

    const TimeGrid grid = bank.grid();
    VerificationReport report;
    report.strategy = to_string(bank.strategy.id);
    report.spread_min = bank.param_min;
    report.spread_max = bank.param_max;
    report.response_spread = bank_spread(bank);
    for (const auto& net : bank.nets) report.net_test_mrp.push_back(net.provenance.test_mrp);

    const auto n = static_cast<std::size_t>(design_test.rows());
    report.samples.resize(n);
    Eigen::MatrixXd fitted(design_test.rows(), bundle_test.cols());
    parallel_for(n, settings.jobs, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        SampleResult& s = report.samples[i];
        s.p_true = design_test.row(row).transpose();
        OptimizerConfig opt = settings.optimizer;
        opt.seed = derive_seed(settings.optimizer.seed, 0x5A3F, i);
        opt.jobs = 1;
        s.p_hat = identify(bank, bundle_test.row(row).transpose(), opt, s.objective);
        s.extrapolated = !s.p_hat.in_cube();
        fitted.row(row) = resimulate(s.p_hat, grid, settings.thermal, s.clamped_for_simulation).transpose();
        s.response_error = response_error(fitted.row(row), bundle_test.row(row), report.response_spread);
    });

    Eigen::MatrixXd p_hat(design_test.rows(), 4);
    for (std::size_t i = 0; i < n; ++i) p_hat.row(static_cast<Eigen::Index>(i)) = report.samples[i].p_hat.p.transpose();
    report.parameter_error = parameter_errors(p_hat, design_test, bank.param_min, bank.param_max);
    report.response_error = response_error(fitted, bundle_test, report.response_spread);
    return report;
}

ValidationReport validate(const SurrogateBank& bank, const ObservedCurve& obs, const CalibrationSettings& settings) {
    const TimeGrid grid = bank.grid();
    const Resampled full = resample_to_grid(obs, grid);
    if (bank.strategy.family == StrategyFamily::Error) {
        if (bank.observed.size() != full.values.size() ||
            (bank.observed - full.values).cwiseAbs().maxCoeff() > 1e-12)
            throw ConfigError(to_string(bank.strategy.id) + " bank was trained against a different observed curve");
    }
    ValidationReport r;
    r.strategy = to_string(bank.strategy.id);
    r.label = obs.label;
    r.resample_warning = full.warning;
    r.p_hat = identify(bank, full.values, settings.optimizer, r.objective);
    r.extrapolated = !r.p_hat.in_cube();
    r.fitted_curve = resimulate(r.p_hat, grid, settings.thermal, r.clamped_for_simulation);
    r.response_error = response_error(r.fitted_curve.transpose(), full.values.transpose(), bank_spread(bank));
    return r;
}

ValidationReport validate_direct(int error_id, const ObservedCurve& obs, const TimeGrid& grid, double response_spread,
                                 const CalibrationSettings& settings) {
    const Resampled full = resample_to_grid(obs, grid);
    OptimizerConfig opt = settings.optimizer;
    opt.jobs = settings.jobs;
    const SurrogateFit fit = direct_calibrate(full.values, error_id, grid, opt, settings.thermal);
    ValidationReport r;
    r.strategy = "Direct" + std::to_string(error_id);
    r.label = obs.label;
    r.resample_warning = full.warning;
    r.p_hat = fit.p;
    r.objective = fit.delta;
    r.extrapolated = !r.p_hat.in_cube();
    r.fitted_curve = resimulate(r.p_hat, grid, settings.thermal, r.clamped_for_simulation);
    r.response_error = response_error(r.fitted_curve.transpose(), full.values.transpose(), response_spread);
    return r;
}

SurrogateBank train_error_bank(StrategyId id, const ObservedCurve& obs, const Eigen::MatrixXd& design,
                               const Eigen::MatrixXd& bundle, const TimeGrid& grid, const BankTrainOptions& options) {
    const StrategyConfig s = strategy_config(id, grid.size());
    if (s.family != StrategyFamily::Error) throw ConfigError(to_string(id) + " is not an error strategy");
    const Eigen::VectorXd observed = resample_to_grid(obs, grid).values;
    StrategyExtras extras;
    extras.observed = &observed;
    return train_bank(s, design, bundle, grid, options, extras);
}

ObservedCurve synthetic_observation(const SyntheticSpec& spec, const ThermalConditions& cond) {
    if (spec.points < 2) throw ConfigError("synthetic curve needs at least 2 points");
    if (!(spec.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    const TimeGrid clock(spec.first_time, spec.last_time, spec.points);
    const Eigen::VectorXd true_times = clock.times().array() + spec.time_shift;
    const HydrationCurve c = simulate(spec.p, TimeGrid(true_times), cond);
    ObservedCurve obs;
    obs.times = clock.times();
    obs.values = c.alpha;
    obs.time_shift = spec.time_shift;
    obs.label = spec.label;
    Rng rng(spec.seed);
    for (Eigen::Index i = 0; i < obs.values.size(); ++i) obs.values[i] += spec.noise_sigma * rng.normal();
    obs.validate();
    return obs;
}

namespace {

nlohmann::json vec4(const Vector4& v) { return {v[0], v[1], v[2], v[3]}; }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const VerificationReport& r) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"p_true", vec4(s.p_true)},
                           {"p_hat", vec4(s.p_hat.p)},
                           {"extrapolated", s.extrapolated},
                           {"clamped_for_simulation", s.clamped_for_simulation},
                           {"objective", finite_or_null(s.objective)},
                           {"response_error", s.response_error}});
    nlohmann::json mrp = nlohmann::json::array();
    for (double m : r.net_test_mrp) mrp.push_back(m < 0 ? nlohmann::json(nullptr) : nlohmann::json(m));
    return {{"strategy", r.strategy},
            {"parameter_error", vec4(r.parameter_error)},
            {"response_error", r.response_error},
            {"parameter_spread", {{"min", vec4(r.spread_min)}, {"max", vec4(r.spread_max)}}},
            {"response_spread", r.response_spread},
            {"net_test_mrp", mrp},
            {"samples", samples}};
}

nlohmann::json to_json(const ValidationReport& r) {
    nlohmann::json flags = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) flags.push_back(r.p_hat[j] < 0.0 || r.p_hat[j] > 1.0);
    return {{"strategy", r.strategy},
            {"label", r.label},
            {"p_hat", vec4(r.p_hat.p)},
            {"extrapolated", r.extrapolated},
            {"extrapolated_components", flags},
            {"clamped_for_simulation", r.clamped_for_simulation},
            {"objective", finite_or_null(r.objective)},
            {"response_error", r.response_error},
            {"resample_warning", r.resample_warning}};
}

void write_samples_csv(const std::filesystem::path& path, const VerificationReport& r) {
    const std::vector<std::string> header = {"p1_true", "p2_true", "p3_true", "p4_true", "p1_hat",
                                             "p2_hat",  "p3_hat",  "p4_hat",  "extrapolated", "objective",
                                             "response_error"};
    Eigen::MatrixXd values(static_cast<Eigen::Index>(r.samples.size()), static_cast<Eigen::Index>(header.size()));
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const auto& s = r.samples[i];
        const auto row = static_cast<Eigen::Index>(i);
        values.row(row).segment(0, 4) = s.p_true.transpose();
        values.row(row).segment(4, 4) = s.p_hat.p.transpose();
        values(row, 8) = s.extrapolated ? 1.0 : 0.0;
        values(row, 9) = s.objective;
        values(row, 10) = s.response_error;
    }
    csv::write(path, header, values);
}

}  // namespace calibkit
