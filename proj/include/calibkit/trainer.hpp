#ifndef CALIBKIT_TRAINER_HPP
#define CALIBKIT_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "calibkit/mlp.hpp"

namespace calibkit {

struct TrainConfig {
    int v_folds = 10;            // V
    int ratio_window = 100;      // J
    int max_iters = 5000;        // K
    double pe_ratio_max = 0.999; // r^PE_max
    int h_min = 1;
    double cve_ratio_max = 0.99; // r^CVE_max
    int max_exceed = 3;          // W
    int h_max = 50;              // safety cap on hidden-layer growth
    std::uint64_t seed = 0;
    int jobs = 1;                // width of concurrent fold training

    /// Throws ConfigError.
    void validate() const;
};

/// Mean relative prediction error in percent:
/// 100 * sum|O - T| / (count * (train_max - train_min)).
double mrp_error(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets, double train_min, double train_max);

/// Raw-space MRP of `net` on a sample set.
double evaluate_mrp(const NeuralNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                    double train_min, double train_max);

/// Windowed error ratio at iteration k over trace[0..k]:
///   sum(trace[k-J .. k]) / sum(trace[k-2J .. k-J-1]).
/// NaN when k < 2J (not yet eligible). A zero denominator gives +inf.
double pe_ratio(const std::vector<double>& trace, int k, int window);

/// True when trace.back() is at an eligible iteration whose ratio exceeds
/// `ratio_max`.
bool ratio_stop(const std::vector<double>& trace, int window, double ratio_max);

// --- conjugate gradient -----------------------------------------------------

/// Returns f(w); writes df/dw into `grad` and an optional auxiliary value
/// (carried to the callback for the accepted point) into `aux`.
using CgObjective = std::function<double(const Eigen::VectorXd& w, Eigen::VectorXd& grad, double& aux)>;
/// Called after every accepted iteration; return true to stop.
using CgCallback = std::function<bool(int iteration, const Eigen::VectorXd& w, double value, double aux)>;

struct CgOptions {
    int max_iters = 5000;
    double gradient_tolerance = 1e-12;  // stop when |g| <= tol * (1 + |f|)
    int restart_every = 0;              // 0: number of weights
};

struct CgResult {
    Eigen::VectorXd w;
    double value = 0.0;
    double aux = 0.0;
    int iterations = 0;
    std::string stop_reason;  // "max_iters", "callback", "gradient", "line_search"
};

/// Polak-Ribiere+ conjugate gradient with restarts; secant line search with
/// Armijo backtracking as fallback.
CgResult minimize_cg(const CgObjective& objective, Eigen::VectorXd w0, const CgOptions& options,
                     const CgCallback& callback = {});

// --- single training run ----------------------------------------------------

struct TrainResult {
    NeuralNet net;
    std::vector<double> trace;  // MRP on the training samples; trace[0] is the initial net
    int iterations = 0;
    std::string stop_reason;    // "pe_ratio", "max_iters", "gradient", "line_search"
};

/// Trains `net` (scalers already set) on raw samples with CG, stopping at K
/// iterations or when the windowed error ratio exceeds pe_ratio_max. MRP
/// normalization uses [train_min, train_max]. Throws TrainingDivergence on a
/// non-finite loss.
TrainResult train_weights(NeuralNet net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          const TrainConfig& config, double train_min, double train_max);

// --- cross-validation ---------------------------------------------------------

/// Disjoint folds covering [0, n), sizes differing by at most one.
std::vector<std::vector<int>> fold_partition(int n, int folds, std::uint64_t seed);

struct HiddenSizeStep {
    int h = 0;
    double cv_error = 0.0;
    double ratio = 0.0;   // cv_error / previous cv_error; NaN for the first step
    int exceed_count = 0; // cumulative
};

struct CvSearch {
    std::vector<HiddenSizeStep> steps;
    int chosen_h = 0;
    std::string stop_reason;  // "max_exceed" or "h_max"
};

/// Hidden-size growth rule: evaluates h = h_min, h_min+1, ... through
/// `cv_error_for(h)`, counting steps whose ratio exceeds cve_ratio_max, and
/// stops when the count reaches max_exceed (or at h_max). Picks the smallest
/// h attaining the minimum error.
CvSearch search_hidden_size(const TrainConfig& config, const std::function<double(int)>& cv_error_for);

struct FoldRecord {
    int fold = 0;
    double train_mrp = 0.0;
    double heldout_mrp = 0.0;
    int iterations = 0;
    std::string stop_reason;
};

struct TrainReport {
    int chosen_h = 0;
    int chosen_fold = 0;
    std::vector<HiddenSizeStep> steps;
    std::vector<std::vector<FoldRecord>> folds;  // parallel to steps
    std::string search_stop_reason;
    NeuralNet final_net;
    double train_mrp = 0.0;
    double test_mrp = -1.0;  // < 0: not evaluated
    std::vector<double> final_trace;
};

/// V-fold cross-validated search over the hidden-layer size. Scalers are fit
/// on the whole sample set (inputs to [0,1], targets to [0.1,0.9]); MRP uses
/// the whole set's target range. The returned net is the selected size's
/// fold net with the smallest training MRP.
TrainReport cross_validate(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const TrainConfig& config,
                           OutputActivation output_activation = OutputActivation::Sigmoid);

nlohmann::json to_json(const TrainReport& report);
nlohmann::json to_json(const TrainConfig& config);

}  // namespace calibkit

#endif
