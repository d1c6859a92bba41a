#ifndef CALIBKIT_CALIBRATION_HPP
#define CALIBKIT_CALIBRATION_HPP

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "calibkit/hydration.hpp"
#include "calibkit/optimizer.hpp"
#include "calibkit/strategies.hpp"

namespace calibkit {

/// A measured hydration curve. Corrected times are `times + time_shift`.
struct ObservedCurve {
    Eigen::VectorXd times;   // hours, strictly increasing
    Eigen::VectorXd values;  // degree of hydration
    double time_shift = 0.0;
    std::string label;

    Eigen::VectorXd corrected_times() const { return times.array() + time_shift; }
    /// Throws DataError: empty, length mismatch, non-increasing times,
    /// non-positive corrected times, non-finite values.
    void validate() const;
};

/// Reads `time_h,alpha`, or `time_h,heat_J_per_g` converted with q_pot
/// (required for heat input).
ObservedCurve read_observed(const std::filesystem::path& path, double time_shift = 0.0,
                            std::optional<double> q_pot = std::nullopt, std::string label = {});
void write_observed(const std::filesystem::path& path, const ObservedCurve& curve);

struct Resampled {
    Eigen::VectorXd values;
    int before_first = 0;  // query points held at the first observation
    int after_last = 0;    // query points held at the last observation
    std::string warning;   // non-empty when before_first > 0
};

/// Linear interpolation in log10(time) between corrected observation times;
/// constant beyond the last observation; constant at the first value (with a
/// warning) before the first. Needs at least 2 observations.
Resampled resample(const ObservedCurve& obs, const Eigen::VectorXd& query_times);
/// Same, at the 1-based grid components `indices`.
Resampled resample_to_grid(const ObservedCurve& obs, const TimeGrid& grid, const std::vector<int>& indices);
/// Every grid point.
Resampled resample_to_grid(const ObservedCurve& obs, const TimeGrid& grid);

/// Mean relative parameter error in percent, per parameter:
/// 100 * mean_i |p_hat_ij - p_ij| / (max_j - min_j). Rows are samples.
Vector4 parameter_errors(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth, const Vector4& spread_min,
                         const Vector4& spread_max);

/// Mean relative response error in percent over every sample and component:
/// 100 * mean |a_hat - a| / spread.
double response_error(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth, double spread);

struct CalibrationSettings {
    OptimizerConfig optimizer = OptimizerConfig::unit_cube(4);
    ThermalConditions thermal;
    int jobs = 1;
};

struct SampleResult {
    Vector4 p_true = Vector4::Constant(std::numeric_limits<double>::quiet_NaN());
    StandardizedParams p_hat;
    bool extrapolated = false;  // some component of p_hat outside [0, 1]
    bool clamped_for_simulation = false;
    double objective = std::numeric_limits<double>::quiet_NaN();  // delta or F value; NaN for inverse
    double response_error = 0.0;  // percent, this sample only
};

struct VerificationReport {
    std::string strategy;
    std::vector<SampleResult> samples;
    Vector4 parameter_error = Vector4::Zero();  // percent per parameter
    double response_error = 0.0;                // percent
    Vector4 spread_min = Vector4::Zero();
    Vector4 spread_max = Vector4::Ones();
    double response_spread = 1.0;
    std::vector<double> net_test_mrp;
};

/// Calibrates every curve of a simulated test set and scores it against the
/// known parameters. Inverse banks evaluate their nets; forward banks fit
/// the surrogate response with the optimizer (seed derived per sample).
/// Error banks are tied to one observed curve and are rejected here.
VerificationReport verify(const SurrogateBank& bank, const Eigen::MatrixXd& design_test,
                          const Eigen::MatrixXd& bundle_test, const CalibrationSettings& settings);

struct ValidationReport {
    std::string strategy;  // strategy id, or "Direct1" / "Direct2"
    std::string label;
    StandardizedParams p_hat;
    bool extrapolated = false;
    bool clamped_for_simulation = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double response_error = 0.0;  // percent against the resampled observation
    std::string resample_warning;
    Eigen::VectorXd fitted_curve;
};

/// Identifies parameters for one observed curve with a trained bank. For an
/// Error bank the bank must have been trained against this curve.
ValidationReport validate(const SurrogateBank& bank, const ObservedCurve& obs, const CalibrationSettings& settings);

/// Direct1 / Direct2: simulator in the loop, no surrogate. The response
/// error is normalized by `response_spread`.
ValidationReport validate_direct(int error_id, const ObservedCurve& obs, const TimeGrid& grid, double response_spread,
                                 const CalibrationSettings& settings);

/// Trains an Error-strategy bank against `obs` (resampled to the grid).
SurrogateBank train_error_bank(StrategyId id, const ObservedCurve& obs, const Eigen::MatrixXd& design,
                               const Eigen::MatrixXd& bundle, const TimeGrid& grid, const BankTrainOptions& options);

/// Re-simulates at p_hat; components outside the physically valid range are
/// clamped into [0, 1] first and `clamped` is set.
Eigen::VectorXd resimulate(const StandardizedParams& p_hat, const TimeGrid& grid, const ThermalConditions& cond,
                           bool& clamped);

struct SyntheticSpec {
    StandardizedParams p;
    double noise_sigma = 0.005;
    double time_shift = 1.0;
    int points = 150;
    double first_time = 0.1;    // experiment clock, hours
    double last_time = 700.0;
    std::uint64_t seed = 0;
    std::string label;
};

/// Pseudo-experimental curve: simulated at p on times `t + time_shift`,
/// recorded on the experiment clock `t`, with additive Gaussian noise.
ObservedCurve synthetic_observation(const SyntheticSpec& spec, const ThermalConditions& cond = {});

nlohmann::json to_json(const VerificationReport& r);
nlohmann::json to_json(const ValidationReport& r);
/// One row per sample: p_true, p_hat, flags, errors.
void write_samples_csv(const std::filesystem::path& path, const VerificationReport& r);

}  // namespace calibkit

#endif
