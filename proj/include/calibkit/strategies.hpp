#ifndef CALIBKIT_STRATEGIES_HPP
#define CALIBKIT_STRATEGIES_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calibkit/analysis.hpp"
#include "calibkit/hydration.hpp"
#include "calibkit/mlp.hpp"
#include "calibkit/trainer.hpp"

namespace calibkit {

enum class StrategyId { ForwComp, ForwSpli, ForwSpliII, ForwSpliIII, ErrorF1, ErrorF2, InvExp, InvExpII, InvPCA };
enum class StrategyFamily { Forward, Error, Inverse };

std::string to_string(StrategyId id);
/// Throws ConfigError listing the valid ids.
StrategyId strategy_from_string(const std::string& name);
const std::vector<StrategyId>& all_strategies();
std::string valid_strategy_list();

struct StrategyConfig {
    StrategyId id = StrategyId::ForwSpli;
    StrategyFamily family = StrategyFamily::Forward;
    /// 1-based response components: forward outputs (ForwComp: the sampled
    /// time components), or inverse inputs for InvExp / InvExpII.
    std::vector<int> components;
    int pc_count = 0;     // InvPCA inputs
    int subsample_m = 0;  // ForwComp time subsampling
    int error_function = 0;  // 1 or 2 for the Error strategies

    int net_count() const;
    /// Identifiers of the bank's nets, e.g. "alpha_300", "p2", "F1", "alpha_t".
    std::vector<std::string> output_ids() const;
};

/// Configuration for `id` on a grid of `n_time` points. Throws ConfigError
/// when a configured component exceeds the grid.
StrategyConfig strategy_config(StrategyId id, int n_time = TimeGrid::kDefaultCount);

/// F1 = sum (r_i - d_i)^2
double error_f1(const Eigen::VectorXd& response, const Eigen::VectorXd& data);
/// F2 = sum |r_i - d_i|
double error_f2(const Eigen::VectorXd& response, const Eigen::VectorXd& data);
double error_function(int which, const Eigen::VectorXd& response, const Eigen::VectorXd& data);

/// Extra inputs some strategies need.
struct StrategyExtras {
    const PcaModel* pca = nullptr;             // InvPCA
    const Eigen::VectorXd* observed = nullptr; // Error strategies: observed curve on the full grid
};

struct NetDataset {
    std::string output_id;
    Eigen::MatrixXd inputs;   // samples x inputs
    Eigen::MatrixXd targets;  // samples x 1
};

/// Training samples for every net of the strategy. `design` is N x 4,
/// `bundle` is N x N_time on `grid`.
std::vector<NetDataset> build_dataset(const StrategyConfig& strategy, const Eigen::MatrixXd& design,
                                      const Eigen::MatrixXd& bundle, const TimeGrid& grid,
                                      const StrategyExtras& extras = {});

/// Input vector of an inverse net for one full-grid curve.
Eigen::VectorXd inverse_features(const StrategyConfig& strategy, const Eigen::VectorXd& curve,
                                 const PcaModel* pca);

/// 64-bit FNV-1a over the raw bytes of a matrix, as 16 hex digits.
std::string matrix_hash(const Eigen::MatrixXd& m);

struct SurrogateBank {
    StrategyConfig strategy;
    std::vector<NeuralNet> nets;        // ordered as strategy.output_ids()
    std::vector<TrainReport> reports;   // empty after loading from disk
    Eigen::VectorXd grid_times;
    std::optional<PcaModel> pca;        // InvPCA
    Eigen::VectorXd observed;           // Error strategies: the curve the bank was trained against
    Vector4 param_min = Vector4::Zero();   // training design spread, per parameter
    Vector4 param_max = Vector4::Ones();
    double response_min = 0.0;          // training bundle range over all components
    double response_max = 1.0;
    std::uint64_t doe_seed = 0;
    std::string design_hash;
    std::string bundle_hash;
    TrainConfig train_config;

    TimeGrid grid() const { return TimeGrid(grid_times); }
};

struct BankTrainOptions {
    TrainConfig train;
    int jobs = 1;
    std::uint64_t doe_seed = 0;
};

/// Trains every net of the strategy. Training errors are rethrown tagged
/// with the net's output id.
SurrogateBank train_bank(const StrategyConfig& strategy, const Eigen::MatrixXd& design, const Eigen::MatrixXd& bundle,
                         const TimeGrid& grid, const BankTrainOptions& options, const StrategyExtras& extras = {});

/// Sets each net's test MRP (range = the net's training target range) from
/// a disjoint design/bundle pair; returns them in net order.
std::vector<double> evaluate_bank(SurrogateBank& bank, const Eigen::MatrixXd& design, const Eigen::MatrixXd& bundle);

/// Forward banks: predicted alpha at bank_components(bank) for points p
/// (rows). Result is points x components.
Eigen::MatrixXd predict_forward(const SurrogateBank& bank, const Eigen::MatrixXd& points);
/// 1-based grid components a forward bank predicts.
const std::vector<int>& bank_components(const SurrogateBank& bank);
/// Error banks: predicted error-function value for points p (rows).
Eigen::VectorXd predict_error(const SurrogateBank& bank, const Eigen::MatrixXd& points);
/// Inverse banks: standardized parameters from a full-grid curve, unclipped.
StandardizedParams predict_parameters(const SurrogateBank& bank, const Eigen::VectorXd& curve);

inline constexpr int kBankFormatVersion = 1;

/// Directory layout: `<strategy>_<output-id>.json` per net, `bank.json`
/// manifest, and for InvPCA `pca.json` plus `pca_basis.csv`.
void save_bank(const SurrogateBank& bank, const std::filesystem::path& dir);
SurrogateBank load_bank(const std::filesystem::path& dir);

}  // namespace calibkit

#endif
