#ifndef CALIBKIT_OPTIMIZER_HPP
#define CALIBKIT_OPTIMIZER_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "calibkit/hydration.hpp"
#include "calibkit/strategies.hpp"

namespace calibkit {

struct OptimizerConfig {
    int pool_rate = 4;
    double radioactivity = 0.33;
    double cross_limit = 0.1;
    int budget = 10000;  // objective evaluations
    std::uint64_t seed = 0;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    int jobs = 1;  // concurrent evaluations within a generation

    /// Box [0,1]^dim with the default constants.
    static OptimizerConfig unit_cube(int dim, std::uint64_t seed = 0);
    int dim() const { return static_cast<int>(lower.size()); }
    int population() const { return pool_rate * dim(); }
    /// Throws ConfigError.
    void validate() const;
};

struct OptimizerResult {
    Eigen::VectorXd best_point;
    double best_value = 0.0;
    int evaluations = 0;
    std::vector<double> best_trace;  // best-so-far after each evaluation
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Evaluates every row of `points`; returns one value per row.
using BatchObjective = std::function<Eigen::VectorXd(const Eigen::MatrixXd& points)>;

/// Evolutionary minimization on a box. Population pool_rate * dim; each
/// member spawns one child x_i + s * (x_a - x_b) with s ~ U(0, 1/cross_limit)
/// and a, b two other distinct members; with probability `radioactivity` one
/// coordinate of the child is redrawn uniformly. Children are clipped to the
/// box and the best distinct points of parents + children survive.
/// Non-finite values count as +inf.
OptimizerResult minimize(const BatchObjective& objective, const OptimizerConfig& config);
OptimizerResult minimize(const Objective& objective, const OptimizerConfig& config);

struct SurrogateFit {
    StandardizedParams p;
    double delta = 0.0;  // objective value at p
    int evaluations = 0;
};

/// Forward banks: minimizes sum_k (observed_k - predicted_k(p))^2 over the
/// unit cube, `observed` given at bank_components(bank). Error banks:
/// minimizes the predicted error-function value. Inverse banks throw
/// ConfigError.
SurrogateFit fit_surrogate_response(const SurrogateBank& bank, const Eigen::VectorXd& observed,
                                    const OptimizerConfig& config);

/// Minimizes F1 or F2 between the simulated and observed curves (observed on
/// the full grid) with the simulator in the loop.
SurrogateFit direct_calibrate(const Eigen::VectorXd& observed, int error_id, const TimeGrid& grid,
                              const OptimizerConfig& config, const ThermalConditions& cond = {});

}  // namespace calibkit

#endif
