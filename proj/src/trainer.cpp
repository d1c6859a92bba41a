#include "calibkit/trainer.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "calibkit/errors.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/random.hpp"

namespace calibkit {

void TrainConfig::validate() const {
    if (v_folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (ratio_window < 1 || max_iters < 1 || h_min < 1 || max_exceed < 1 || h_max < h_min)
        throw ConfigError("training counts must be >= 1 and h_max >= h_min");
    if (!(pe_ratio_max > 0.0 && pe_ratio_max <= 1.0) || !(cve_ratio_max > 0.0 && cve_ratio_max <= 1.0))
        throw ConfigError("training ratio thresholds must lie in (0, 1]");
    if (2 * ratio_window > max_iters)
        throw ConfigError("ratio window 2J = " + std::to_string(2 * ratio_window) + " exceeds max_iters = " +
                          std::to_string(max_iters));
}

double mrp_error(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets, double train_min, double train_max) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
        throw ShapeError("mrp_error: outputs and targets differ in shape");
    if (outputs.size() == 0) throw ShapeError("mrp_error: empty sample set");
    if (!(train_max > train_min)) throw ConfigError("mrp_error: degenerate training target range");
    return 100.0 * (outputs - targets).cwiseAbs().sum() /
           (static_cast<double>(outputs.size()) * (train_max - train_min));
}

double evaluate_mrp(const NeuralNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                    double train_min, double train_max) {
    return mrp_error(forward_batch(net, inputs), targets, train_min, train_max);
}

double pe_ratio(const std::vector<double>& trace, int k, int window) {
    if (window < 1) throw ConfigError("ratio window must be >= 1");
    if (k < 2 * window || k >= static_cast<int>(trace.size())) return std::numeric_limits<double>::quiet_NaN();
    double recent = 0.0, previous = 0.0;
    for (int j = k - window; j <= k; ++j) recent += trace[static_cast<std::size_t>(j)];
    for (int j = k - 2 * window; j <= k - window - 1; ++j) previous += trace[static_cast<std::size_t>(j)];
    if (previous == 0.0) return recent == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return recent / previous;
}

bool ratio_stop(const std::vector<double>& trace, int window, double ratio_max) {
    if (trace.empty()) return false;
    const double r = pe_ratio(trace, static_cast<int>(trace.size()) - 1, window);
    return !std::isnan(r) && r > ratio_max;
}

// --- conjugate gradient -----------------------------------------------------

namespace {

struct Point {
    Eigen::VectorXd w;
    Eigen::VectorXd g;
    double f = 0.0;
    double aux = 0.0;
};

Point evaluate(const CgObjective& objective, Eigen::VectorXd w) {
    Point p;
    p.w = std::move(w);
    p.g.resize(p.w.size());
    p.f = objective(p.w, p.g, p.aux);
    return p;
}

constexpr double kArmijo = 1e-4;

// Returns false if no acceptable step was found along d.
bool line_search(const CgObjective& objective, const Point& x, const Eigen::VectorXd& d, double slope, double a0,
                 Point& out, double& step) {
    auto armijo = [&](const Point& p, double a) { return std::isfinite(p.f) && p.f <= x.f + kArmijo * a * slope; };

    Point p0 = evaluate(objective, x.w + a0 * d);
    double a_try = a0;
    if (std::isfinite(p0.f)) {
        const double s0 = p0.g.dot(d);
        // Good enough already: sufficient decrease and a flat directional derivative.
        if (armijo(p0, a0) && std::abs(s0) <= 0.1 * std::abs(slope)) {
            out = std::move(p0);
            step = a0;
            return true;
        }
        const double curvature = s0 - slope;
        if (curvature > 0.0) {
            const double a_sec = std::min(a0 * (-slope) / curvature, 10.0 * a0);
            Point p1 = evaluate(objective, x.w + a_sec * d);
            const bool ok0 = armijo(p0, a0), ok1 = armijo(p1, a_sec);
            if (ok1 && (!ok0 || p1.f <= p0.f)) {
                out = std::move(p1);
                step = a_sec;
                return true;
            }
            if (ok0) {
                out = std::move(p0);
                step = a0;
                return true;
            }
            a_try = std::min(a0, a_sec);
        } else if (armijo(p0, a0)) {
            out = std::move(p0);
            step = a0;
            return true;
        }
    }
    for (int i = 0; i < 40; ++i) {
        a_try *= 0.5;
        Point p = evaluate(objective, x.w + a_try * d);
        if (armijo(p, a_try)) {
            out = std::move(p);
            step = a_try;
            return true;
        }
    }
    return false;
}

}  // namespace

CgResult minimize_cg(const CgObjective& objective, Eigen::VectorXd w0, const CgOptions& options,
                     const CgCallback& callback) {
    const int n = static_cast<int>(w0.size());
    const int restart_every = options.restart_every > 0 ? options.restart_every : std::max(n, 1);
    Point x = evaluate(objective, std::move(w0));
    if (!std::isfinite(x.f)) throw NumericalError("objective is not finite at the starting point", x.f);

    CgResult result;
    Eigen::VectorXd d = -x.g;
    double prev_step = 0.0, prev_slope = 0.0;
    int since_restart = 0;
    result.stop_reason = "max_iters";

    for (int it = 1; it <= options.max_iters; ++it) {
        if (x.g.norm() <= options.gradient_tolerance * (1.0 + std::abs(x.f))) {
            result.stop_reason = "gradient";
            break;
        }
        double slope = x.g.dot(d);
        bool steepest = false;
        if (!(slope < 0.0) || since_restart >= restart_every) {
            d = -x.g;
            slope = -x.g.squaredNorm();
            steepest = true;
            since_restart = 0;
        }
        double a0 = prev_step > 0.0 ? prev_step * prev_slope / slope : 1.0 / std::max(1.0, d.norm());
        if (!(a0 > 0.0) || !std::isfinite(a0)) a0 = 1.0 / std::max(1.0, d.norm());

        Point next;
        double step = 0.0;
        // A step that does not lower f means rounding has taken over.
        auto progress = [&](double a) { return line_search(objective, x, d, slope, a, next, step) && next.f < x.f; };
        if (!progress(a0)) {
            if (steepest) {
                result.stop_reason = "line_search";
                break;
            }
            d = -x.g;
            slope = -x.g.squaredNorm();
            since_restart = 0;
            if (!progress(1.0 / std::max(1.0, d.norm()))) {
                result.stop_reason = "line_search";
                break;
            }
        }
        const double beta = std::max(0.0, next.g.dot(next.g - x.g) / x.g.squaredNorm());
        prev_step = step;
        prev_slope = slope;
        x = std::move(next);
        d = -x.g + beta * d;
        ++since_restart;
        result.iterations = it;
        if (callback && callback(it, x.w, x.f, x.aux)) {
            result.stop_reason = "callback";
            break;
        }
    }
    result.w = std::move(x.w);
    result.value = x.f;
    result.aux = x.aux;
    return result;
}

// --- single training run ----------------------------------------------------

TrainResult train_weights(NeuralNet net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          const TrainConfig& config, double train_min, double train_max) {
    config.validate();
    net.validate();
    if (inputs.rows() == 0) throw ConfigError("train_weights: empty training set");
    if (inputs.rows() != targets.rows()) throw ShapeError("train_weights: inputs and targets differ in row count");
    if (!(train_max > train_min)) throw ConfigError("train_weights: degenerate training target range");

    const Eigen::MatrixXd xs = net.input_scaler.scale_rows(inputs);
    const Eigen::MatrixXd ts = net.output_scaler.scale_rows(targets);
    const auto& os = net.output_scaler;
    const Eigen::VectorXd raw_per_scaled = (os.data_max - os.data_min) / (os.target_hi - os.target_lo);
    const double mrp_norm = 100.0 / (static_cast<double>(targets.size()) * (train_max - train_min));

    int current_iteration = 0;
    const NetTopology topology = net.topology;
    CgObjective objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad, double& aux) {
        LossGradient lg = loss_gradient_scaled(topology, w, xs, ts);
        if (!std::isfinite(lg.loss))
            throw TrainingDivergence("non-finite training loss at iteration " + std::to_string(current_iteration),
                                     current_iteration);
        grad = std::move(lg.gradient);
        aux = mrp_norm * lg.abs_error_by_output.dot(raw_per_scaled);
        return lg.loss;
    };

    TrainResult result;
    {
        Eigen::VectorXd g(net.weights.size());
        double aux = 0.0;
        objective(net.weights, g, aux);
        result.trace.push_back(aux);
    }
    bool ratio_hit = false;
    CgCallback callback = [&](int it, const Eigen::VectorXd&, double, double aux) {
        current_iteration = it;
        result.trace.push_back(aux);
        ratio_hit = ratio_stop(result.trace, config.ratio_window, config.pe_ratio_max);
        return ratio_hit;
    };
    CgOptions options;
    options.max_iters = config.max_iters;
    CgResult cg = minimize_cg(objective, net.weights, options, callback);

    net.weights = std::move(cg.w);
    result.net = std::move(net);
    result.iterations = cg.iterations;
    result.stop_reason = ratio_hit ? "pe_ratio" : cg.stop_reason;
    return result;
}

// --- cross-validation ---------------------------------------------------------

std::vector<std::vector<int>> fold_partition(int n, int folds, std::uint64_t seed) {
    if (folds < 1) throw ConfigError("fold count must be >= 1");
    if (n < folds)
        throw ConfigError("dataset of " + std::to_string(n) + " samples is smaller than V = " + std::to_string(folds));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i % folds)].push_back(order[static_cast<std::size_t>(i)]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

CvSearch search_hidden_size(const TrainConfig& config, const std::function<double(int)>& cv_error_for) {
    config.validate();
    CvSearch search;
    int exceed = 0;
    for (int h = config.h_min;; ++h) {
        HiddenSizeStep step;
        step.h = h;
        step.cv_error = cv_error_for(h);
        if (!std::isfinite(step.cv_error))
            throw NumericalError("cross-validation error is not finite for h = " + std::to_string(h), step.cv_error);
        if (search.steps.empty()) {
            step.ratio = std::numeric_limits<double>::quiet_NaN();
        } else {
            const double prev = search.steps.back().cv_error;
            step.ratio = prev > 0.0 ? step.cv_error / prev
                                    : (step.cv_error > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
            if (step.ratio > config.cve_ratio_max) ++exceed;
        }
        step.exceed_count = exceed;
        search.steps.push_back(step);
        if (exceed >= config.max_exceed) {
            search.stop_reason = "max_exceed";
            break;
        }
        if (h >= config.h_max) {
            search.stop_reason = "h_max";
            break;
        }
    }
    const auto best = std::min_element(search.steps.begin(), search.steps.end(),
                                       [](const HiddenSizeStep& a, const HiddenSizeStep& b) {
                                           return a.cv_error < b.cv_error;
                                       });
    search.chosen_h = best->h;
    return search;
}

namespace {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

}  // namespace

TrainReport cross_validate(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const TrainConfig& config,
                           OutputActivation output_activation) {
    config.validate();
    if (inputs.rows() != targets.rows()) throw ShapeError("cross_validate: inputs and targets differ in row count");
    const int n = static_cast<int>(inputs.rows());
    const int v = config.v_folds;
    const auto folds = fold_partition(n, v, derive_seed(config.seed, 0xF01D));

    const AffineScaler in_scaler = AffineScaler::fit(inputs, 0.0, 1.0);
    const AffineScaler out_scaler = AffineScaler::fit(targets, 0.1, 0.9);
    const double tmin = targets.minCoeff(), tmax = targets.maxCoeff();

    std::vector<Eigen::MatrixXd> train_x(v), train_t(v), held_x(v), held_t(v);
    for (int i = 0; i < v; ++i) {
        std::vector<char> held(static_cast<std::size_t>(n), 0);
        for (int r : folds[static_cast<std::size_t>(i)]) held[static_cast<std::size_t>(r)] = 1;
        std::vector<int> keep;
        for (int r = 0; r < n; ++r)
            if (!held[static_cast<std::size_t>(r)]) keep.push_back(r);
        if (keep.empty()) keep = folds[static_cast<std::size_t>(i)];  // V = 1: train on everything
        train_x[i] = select_rows(inputs, keep);
        train_t[i] = select_rows(targets, keep);
        held_x[i] = select_rows(inputs, folds[static_cast<std::size_t>(i)]);
        held_t[i] = select_rows(targets, folds[static_cast<std::size_t>(i)]);
    }

    std::map<int, std::vector<TrainResult>> runs;
    std::map<int, std::vector<FoldRecord>> records;
    auto cv_error_for = [&](int h) {
        NetTopology topology{static_cast<int>(inputs.cols()), h, static_cast<int>(targets.cols()), output_activation};
        std::vector<TrainResult> results(static_cast<std::size_t>(v));
        std::vector<FoldRecord> recs(static_cast<std::size_t>(v));
        parallel_for(static_cast<std::size_t>(v), config.jobs, [&](std::size_t i) {
            NeuralNet net = make_net(topology, random_weights(topology, derive_seed(config.seed, h, i)));
            net.input_scaler = in_scaler;
            net.output_scaler = out_scaler;
            try {
                results[i] = train_weights(std::move(net), train_x[i], train_t[i], config, tmin, tmax);
            } catch (const TrainingDivergence& e) {
                throw TrainingDivergence("h = " + std::to_string(h) + ", fold " + std::to_string(i + 1) + ": " +
                                             e.what(),
                                         e.iteration());
            }
            FoldRecord& rec = recs[i];
            rec.fold = static_cast<int>(i);
            rec.train_mrp = evaluate_mrp(results[i].net, train_x[i], train_t[i], tmin, tmax);
            rec.heldout_mrp = evaluate_mrp(results[i].net, held_x[i], held_t[i], tmin, tmax);
            rec.iterations = results[i].iterations;
            rec.stop_reason = results[i].stop_reason;
        });
        double sum = 0.0;
        for (const auto& r : recs) sum += r.heldout_mrp;
        runs[h] = std::move(results);
        records[h] = std::move(recs);
        return sum / v;
    };

    const CvSearch search = search_hidden_size(config, cv_error_for);

    TrainReport report;
    report.chosen_h = search.chosen_h;
    report.steps = search.steps;
    report.search_stop_reason = search.stop_reason;
    for (const auto& s : search.steps) report.folds.push_back(records[s.h]);

    const auto& chosen = records[search.chosen_h];
    int best = 0;
    for (int i = 1; i < v; ++i)
        if (chosen[static_cast<std::size_t>(i)].train_mrp < chosen[static_cast<std::size_t>(best)].train_mrp) best = i;
    TrainResult& winner = runs[search.chosen_h][static_cast<std::size_t>(best)];
    report.chosen_fold = best;
    report.final_net = std::move(winner.net);
    report.final_net.provenance.train_mrp = chosen[static_cast<std::size_t>(best)].train_mrp;
    report.final_net.provenance.seed = config.seed;
    report.train_mrp = chosen[static_cast<std::size_t>(best)].train_mrp;
    report.final_trace = std::move(winner.trace);
    return report;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"v_folds", c.v_folds},           {"ratio_window", c.ratio_window}, {"max_iters", c.max_iters},
            {"pe_ratio_max", c.pe_ratio_max}, {"h_min", c.h_min},               {"cve_ratio_max", c.cve_ratio_max},
            {"max_exceed", c.max_exceed},     {"h_max", c.h_max},               {"seed", c.seed}};
}

nlohmann::json to_json(const TrainReport& r) {
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t s = 0; s < r.steps.size(); ++s) {
        const auto& st = r.steps[s];
        nlohmann::json folds = nlohmann::json::array();
        for (const auto& f : r.folds[s])
            folds.push_back({{"fold", f.fold + 1},
                             {"train_mrp", f.train_mrp},
                             {"heldout_mrp", f.heldout_mrp},
                             {"iterations", f.iterations},
                             {"stop_reason", f.stop_reason}});
        steps.push_back({{"h", st.h},
                         {"cv_error", st.cv_error},
                         {"ratio", std::isnan(st.ratio) ? nlohmann::json(nullptr) : nlohmann::json(st.ratio)},
                         {"exceed_count", st.exceed_count},
                         {"folds", folds}});
    }
    return {{"chosen_h", r.chosen_h},
            {"chosen_fold", r.chosen_fold + 1},
            {"search_stop_reason", r.search_stop_reason},
            {"train_mrp", r.train_mrp},
            {"test_mrp", r.test_mrp < 0 ? nlohmann::json(nullptr) : nlohmann::json(r.test_mrp)},
            {"steps", steps}};
}

}  // namespace calibkit
