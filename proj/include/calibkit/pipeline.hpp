#ifndef CALIBKIT_PIPELINE_HPP
#define CALIBKIT_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "calibkit/calibration.hpp"
#include "calibkit/doe.hpp"
#include "calibkit/strategies.hpp"

namespace calibkit {

struct PipelineConfig {
    StrategyId strategy = StrategyId::ForwSpli;
    int n_train = 100;
    int n_test = 50;
    std::uint64_t seed = 0;
    int lhs_iterations = 10000;
    TrainConfig train;            // seed is overridden from `seed`
    OptimizerConfig optimizer = OptimizerConfig::unit_cube(4);  // seed overridden
    ThermalConditions thermal;
    int jobs = 1;
};

struct PipelineResult {
    Design train_design;
    Design test_design;
    TimeGrid grid;
    Eigen::MatrixXd bundle_train;
    Eigen::MatrixXd bundle_test;
    SurrogateBank bank;
    std::optional<VerificationReport> verification;  // forward and inverse strategies
    std::optional<ValidationReport> validation;      // error strategies
    std::optional<ObservedCurve> observed;           // error strategies
    nlohmann::json report;
};

/// doe -> simulate -> train bank -> evaluate nets -> verify. Error
/// strategies are trained against the noise-free simulation of the first
/// test point and validated on it. Every random draw derives from
/// config.seed, so repeated runs produce identical reports.
PipelineResult run_pipeline(const PipelineConfig& config);

/// Writes designs, bank, report.json and samples.csv under `dir`.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& dir);

}  // namespace calibkit

#endif
