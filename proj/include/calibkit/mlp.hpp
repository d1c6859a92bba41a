#ifndef CALIBKIT_MLP_HPP
#define CALIBKIT_MLP_HPP

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace calibkit {

enum class OutputActivation { Sigmoid, Linear };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& name);

template <class Scalar>
Scalar sigmoid(Scalar u) {
    using std::exp;
    return Scalar(1) / (Scalar(1) + exp(-u));
}

/// One hidden sigmoid layer; bias units feed the hidden and output layers.
struct NetTopology {
    int n_inputs = 1;
    int n_hidden = 1;
    int n_outputs = 1;
    OutputActivation output_activation = OutputActivation::Sigmoid;

    /// (n_inputs + 1) * n_hidden + (n_hidden + 1) * n_outputs
    int weight_count() const { return (n_inputs + 1) * n_hidden + (n_hidden + 1) * n_outputs; }
    void validate() const;
};

/// Per-dimension affine map of [data_min, data_max] onto [target_lo, target_hi].
struct AffineScaler {
    Eigen::VectorXd data_min;
    Eigen::VectorXd data_max;
    double target_lo = 0.0;
    double target_hi = 1.0;

    /// Fits min/max over the rows of `samples`; throws ConfigError for a
    /// constant column.
    static AffineScaler fit(const Eigen::MatrixXd& samples, double target_lo, double target_hi);
    static AffineScaler identity(int dim);

    int dim() const { return static_cast<int>(data_min.size()); }
    Eigen::VectorXd scale(const Eigen::VectorXd& x) const;
    Eigen::VectorXd unscale(const Eigen::VectorXd& y) const;
    /// Row-wise versions for sample matrices (rows are samples).
    Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd unscale_rows(const Eigen::MatrixXd& y) const;
};

/// Where a trained net came from; serialized with it.
struct NetProvenance {
    std::string strategy;
    std::string output_id;
    double train_mrp = 0.0;
    double test_mrp = -1.0;  // < 0: not evaluated
    std::uint64_t seed = 0;
};

/// Flat weight layout (bias first in every neuron, mirroring a bias unit at
/// index 0 of the previous layer):
///
///   hidden neuron j (j = 0..h-1):  w[j*(n_in+1) + 0]      bias
///                                  w[j*(n_in+1) + 1 + k]  input k
///   output neuron m (m = 0..n_out-1), offset H = h*(n_in+1):
///                                  w[H + m*(h+1) + 0]     bias
///                                  w[H + m*(h+1) + 1 + j] hidden j
struct NeuralNet {
    NetTopology topology;
    Eigen::VectorXd weights;
    AffineScaler input_scaler;
    AffineScaler output_scaler;
    NetProvenance provenance;

    void validate() const;
};

/// Net with identity scalers and the given weights (zero when empty).
NeuralNet make_net(const NetTopology& topology, Eigen::VectorXd weights = {});

/// Uniform weights in [-0.5, 0.5] from `seed`.
Eigen::VectorXd random_weights(const NetTopology& topology, std::uint64_t seed, double half_width = 0.5);

/// Raw input -> raw output.
Eigen::VectorXd forward(const NeuralNet& net, const Eigen::VectorXd& x);

/// Rows are samples; raw in, raw out.
Eigen::MatrixXd forward_batch(const NeuralNet& net, const Eigen::MatrixXd& inputs);

/// Forward pass in scaled space (no scalers applied). Rows are samples.
Eigen::MatrixXd forward_scaled(const NetTopology& topology, const Eigen::VectorXd& weights,
                               const Eigen::MatrixXd& scaled_inputs);

struct LossGradient {
    double loss = 0.0;             // sum of squared scaled errors
    double abs_error_sum = 0.0;    // sum of |scaled error|, for MRP monitoring
    Eigen::VectorXd abs_error_by_output;  // same, per output column
    Eigen::VectorXd gradient;      // d loss / d weights
};

/// Loss and exact backpropagated gradient in scaled space. Rows are samples.
LossGradient loss_gradient_scaled(const NetTopology& topology, const Eigen::VectorXd& weights,
                                  const Eigen::MatrixXd& scaled_inputs, const Eigen::MatrixXd& scaled_targets);

/// Scales a raw batch with the net's scalers and returns the scaled-space
/// loss gradient with respect to the net's weights.
LossGradient gradient(const NeuralNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

inline constexpr int kNetFormatVersion = 1;

nlohmann::json to_json(const NeuralNet& net);
/// Throws ParseError naming the offending field path.
NeuralNet net_from_json(const nlohmann::json& doc);

std::string serialize(const NeuralNet& net);
NeuralNet deserialize(const std::string& text);

}  // namespace calibkit

#endif
