#include "calibkit/mlp.hpp"

#include "calibkit/errors.hpp"
#include "calibkit/random.hpp"

namespace calibkit {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using WeightMap = Eigen::Map<RowMajorMatrix>;

ConstWeightMap hidden_block(const NetTopology& t, const Eigen::VectorXd& w) {
    return ConstWeightMap(w.data(), t.n_hidden, t.n_inputs + 1);
}
ConstWeightMap output_block(const NetTopology& t, const Eigen::VectorXd& w) {
    return ConstWeightMap(w.data() + t.n_hidden * (t.n_inputs + 1), t.n_outputs, t.n_hidden + 1);
}

Eigen::ArrayXXd logistic(const Eigen::ArrayXXd& u) { return 1.0 / (1.0 + (-u).exp()); }

void check_batch(const NetTopology& t, const Eigen::VectorXd& w, const Eigen::MatrixXd& x) {
    if (w.size() != t.weight_count())
        throw ShapeError("weight vector has " + std::to_string(w.size()) + " entries, topology needs " +
                         std::to_string(t.weight_count()));
    if (x.cols() != t.n_inputs)
        throw ShapeError("input has " + std::to_string(x.cols()) + " columns, net expects " +
                         std::to_string(t.n_inputs));
}

}  // namespace

std::string to_string(OutputActivation a) { return a == OutputActivation::Sigmoid ? "sigmoid" : "linear"; }

OutputActivation output_activation_from_string(const std::string& name) {
    if (name == "sigmoid") return OutputActivation::Sigmoid;
    if (name == "linear") return OutputActivation::Linear;
    throw ParseError("unknown output activation '" + name + "'");
}

void NetTopology::validate() const {
    if (n_inputs < 1 || n_hidden < 1 || n_outputs < 1)
        throw ConfigError("net topology counts must be >= 1");
}

AffineScaler AffineScaler::fit(const Eigen::MatrixXd& samples, double lo, double hi) {
    if (samples.rows() < 1) throw ConfigError("cannot fit a scaler to an empty sample set");
    AffineScaler s;
    s.data_min = samples.colwise().minCoeff().transpose();
    s.data_max = samples.colwise().maxCoeff().transpose();
    s.target_lo = lo;
    s.target_hi = hi;
    for (Eigen::Index i = 0; i < s.data_min.size(); ++i)
        if (!(s.data_max[i] > s.data_min[i]))
            throw ConfigError("column " + std::to_string(i + 1) + " is constant; scaler would not be invertible");
    return s;
}

AffineScaler AffineScaler::identity(int dim) {
    AffineScaler s;
    s.data_min = Eigen::VectorXd::Zero(dim);
    s.data_max = Eigen::VectorXd::Ones(dim);
    return s;
}

Eigen::VectorXd AffineScaler::scale(const Eigen::VectorXd& x) const {
    return (target_lo + (x - data_min).array() / (data_max - data_min).array() * (target_hi - target_lo)).matrix();
}

Eigen::VectorXd AffineScaler::unscale(const Eigen::VectorXd& y) const {
    return (data_min.array() + (y.array() - target_lo) / (target_hi - target_lo) * (data_max - data_min).array())
        .matrix();
}

Eigen::MatrixXd AffineScaler::scale_rows(const Eigen::MatrixXd& x) const {
    const Eigen::RowVectorXd factor =
        ((target_hi - target_lo) / (data_max - data_min).array()).matrix().transpose();
    return ((x.rowwise() - data_min.transpose()).array().rowwise() * factor.array() + target_lo).matrix();
}

Eigen::MatrixXd AffineScaler::unscale_rows(const Eigen::MatrixXd& y) const {
    const Eigen::RowVectorXd factor = ((data_max - data_min).array() / (target_hi - target_lo)).matrix().transpose();
    return (((y.array() - target_lo).rowwise() * factor.array()).rowwise() + data_min.transpose().array()).matrix();
}

void NeuralNet::validate() const {
    topology.validate();
    if (weights.size() != topology.weight_count())
        throw ShapeError("weight vector has " + std::to_string(weights.size()) + " entries, topology needs " +
                         std::to_string(topology.weight_count()));
    if (input_scaler.dim() != topology.n_inputs || input_scaler.data_max.size() != topology.n_inputs)
        throw ShapeError("input scaler dimension differs from n_inputs");
    if (output_scaler.dim() != topology.n_outputs || output_scaler.data_max.size() != topology.n_outputs)
        throw ShapeError("output scaler dimension differs from n_outputs");
    if (!((input_scaler.data_max - input_scaler.data_min).array() > 0.0).all() ||
        !((output_scaler.data_max - output_scaler.data_min).array() > 0.0).all() ||
        input_scaler.target_hi == input_scaler.target_lo || output_scaler.target_hi == output_scaler.target_lo)
        throw ConfigError("scaler is not invertible");
}

NeuralNet make_net(const NetTopology& topology, Eigen::VectorXd weights) {
    topology.validate();
    NeuralNet net;
    net.topology = topology;
    net.weights = weights.size() ? std::move(weights) : Eigen::VectorXd::Zero(topology.weight_count());
    net.input_scaler = AffineScaler::identity(topology.n_inputs);
    net.output_scaler = AffineScaler::identity(topology.n_outputs);
    net.validate();
    return net;
}

Eigen::VectorXd random_weights(const NetTopology& topology, std::uint64_t seed, double half_width) {
    Rng rng(seed);
    Eigen::VectorXd w(topology.weight_count());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-half_width, half_width);
    return w;
}

Eigen::MatrixXd forward_scaled(const NetTopology& t, const Eigen::VectorXd& w, const Eigen::MatrixXd& x) {
    check_batch(t, w, x);
    const auto w1 = hidden_block(t, w);
    const auto w2 = output_block(t, w);
    const Eigen::ArrayXXd hidden =
        logistic(((x * w1.rightCols(t.n_inputs).transpose()).rowwise() + w1.col(0).transpose()).array());
    Eigen::ArrayXXd out =
        ((hidden.matrix() * w2.rightCols(t.n_hidden).transpose()).rowwise() + w2.col(0).transpose()).array();
    if (t.output_activation == OutputActivation::Sigmoid) out = logistic(out);
    return out.matrix();
}

Eigen::VectorXd forward(const NeuralNet& net, const Eigen::VectorXd& x) {
    if (x.size() != net.topology.n_inputs)
        throw ShapeError("input has " + std::to_string(x.size()) + " values, net expects " +
                         std::to_string(net.topology.n_inputs));
    const Eigen::MatrixXd row = net.input_scaler.scale(x).transpose();
    const Eigen::VectorXd y = forward_scaled(net.topology, net.weights, row).row(0).transpose();
    return net.output_scaler.unscale(y);
}

Eigen::MatrixXd forward_batch(const NeuralNet& net, const Eigen::MatrixXd& inputs) {
    return net.output_scaler.unscale_rows(
        forward_scaled(net.topology, net.weights, net.input_scaler.scale_rows(inputs)));
}

LossGradient loss_gradient_scaled(const NetTopology& t, const Eigen::VectorXd& w, const Eigen::MatrixXd& x,
                                  const Eigen::MatrixXd& targets) {
    check_batch(t, w, x);
    if (targets.rows() != x.rows() || targets.cols() != t.n_outputs)
        throw ShapeError("target batch shape does not match inputs/outputs");
    if (x.rows() == 0) throw ShapeError("empty batch");

    const auto w1 = hidden_block(t, w);
    const auto w2 = output_block(t, w);
    const Eigen::ArrayXXd hidden =
        logistic(((x * w1.rightCols(t.n_inputs).transpose()).rowwise() + w1.col(0).transpose()).array());
    Eigen::ArrayXXd out =
        ((hidden.matrix() * w2.rightCols(t.n_hidden).transpose()).rowwise() + w2.col(0).transpose()).array();
    if (t.output_activation == OutputActivation::Sigmoid) out = logistic(out);

    const Eigen::ArrayXXd err = out - targets.array();
    LossGradient r;
    r.loss = err.square().sum();
    r.abs_error_by_output = err.abs().colwise().sum().transpose();
    r.abs_error_sum = r.abs_error_by_output.sum();

    Eigen::ArrayXXd d_out = 2.0 * err;
    if (t.output_activation == OutputActivation::Sigmoid) d_out *= out * (1.0 - out);
    const Eigen::ArrayXXd d_hidden = (d_out.matrix() * w2.rightCols(t.n_hidden)).array() * hidden * (1.0 - hidden);

    r.gradient.resize(w.size());
    WeightMap g1(r.gradient.data(), t.n_hidden, t.n_inputs + 1);
    WeightMap g2(r.gradient.data() + t.n_hidden * (t.n_inputs + 1), t.n_outputs, t.n_hidden + 1);
    g1.col(0) = d_hidden.colwise().sum().transpose();
    g1.rightCols(t.n_inputs) = d_hidden.matrix().transpose() * x;
    g2.col(0) = d_out.colwise().sum().transpose();
    g2.rightCols(t.n_hidden) = d_out.matrix().transpose() * hidden.matrix();
    return r;
}

LossGradient gradient(const NeuralNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    if (targets.cols() != net.topology.n_outputs || targets.rows() != inputs.rows())
        throw ShapeError("target batch shape does not match inputs/outputs");
    return loss_gradient_scaled(net.topology, net.weights, net.input_scaler.scale_rows(inputs),
                                net.output_scaler.scale_rows(targets));
}

// --- serialization ---------------------------------------------------------

namespace {

nlohmann::json scaler_json(const AffineScaler& s) {
    return {{"data_min", std::vector<double>(s.data_min.data(), s.data_min.data() + s.data_min.size())},
            {"data_max", std::vector<double>(s.data_max.data(), s.data_max.data() + s.data_max.size())},
            {"target", {s.target_lo, s.target_hi}}};
}

const nlohmann::json& field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key + ": missing");
    return *it;
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& path) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

Eigen::VectorXd vector_field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_array()) throw ParseError(path + "." + key + ": expected an array");
    auto values = get_as<std::vector<double>>(v, path + "." + key);
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

AffineScaler scaler_from(const nlohmann::json& obj, const std::string& path) {
    AffineScaler s;
    s.data_min = vector_field(obj, "data_min", path);
    s.data_max = vector_field(obj, "data_max", path);
    auto target = get_as<std::vector<double>>(field(obj, "target", path), path + ".target");
    if (target.size() != 2) throw ParseError(path + ".target: expected 2 values");
    s.target_lo = target[0];
    s.target_hi = target[1];
    if (s.data_min.size() != s.data_max.size()) throw ParseError(path + ": data_min/data_max length mismatch");
    return s;
}

}  // namespace

nlohmann::json to_json(const NeuralNet& net) {
    nlohmann::json doc;
    doc["format"] = "calibkit-mlp";
    doc["version"] = kNetFormatVersion;
    doc["topology"] = {{"n_inputs", net.topology.n_inputs},
                       {"n_hidden", net.topology.n_hidden},
                       {"n_outputs", net.topology.n_outputs},
                       {"hidden_activation", "sigmoid"},
                       {"output_activation", to_string(net.topology.output_activation)}};
    doc["weight_layout"] = "hidden[j][bias,inputs...] then output[m][bias,hidden...], row-major";
    doc["weights"] = std::vector<double>(net.weights.data(), net.weights.data() + net.weights.size());
    doc["input_scaler"] = scaler_json(net.input_scaler);
    doc["output_scaler"] = scaler_json(net.output_scaler);
    doc["provenance"] = {{"strategy", net.provenance.strategy},
                         {"output_id", net.provenance.output_id},
                         {"train_mrp", net.provenance.train_mrp},
                         {"test_mrp", net.provenance.test_mrp},
                         {"seed", net.provenance.seed}};
    return doc;
}

NeuralNet net_from_json(const nlohmann::json& doc) {
    const std::string root = "$";
    const int version = get_as<int>(field(doc, "version", root), "$.version");
    if (version != kNetFormatVersion)
        throw ParseError("$.version: unsupported network format version " + std::to_string(version) +
                         " (supported: " + std::to_string(kNetFormatVersion) + ")");
    if (doc.contains("format") && get_as<std::string>(doc["format"], "$.format") != "calibkit-mlp")
        throw ParseError("$.format: not a calibkit-mlp document");

    NeuralNet net;
    const auto& topo = field(doc, "topology", root);
    net.topology.n_inputs = get_as<int>(field(topo, "n_inputs", "$.topology"), "$.topology.n_inputs");
    net.topology.n_hidden = get_as<int>(field(topo, "n_hidden", "$.topology"), "$.topology.n_hidden");
    net.topology.n_outputs = get_as<int>(field(topo, "n_outputs", "$.topology"), "$.topology.n_outputs");
    if (topo.contains("hidden_activation") &&
        get_as<std::string>(topo["hidden_activation"], "$.topology.hidden_activation") != "sigmoid")
        throw ParseError("$.topology.hidden_activation: only 'sigmoid' is supported");
    net.topology.output_activation = output_activation_from_string(
        get_as<std::string>(field(topo, "output_activation", "$.topology"), "$.topology.output_activation"));
    if (net.topology.n_inputs < 1 || net.topology.n_hidden < 1 || net.topology.n_outputs < 1)
        throw ParseError("$.topology: counts must be >= 1");

    net.weights = vector_field(doc, "weights", root);
    if (net.weights.size() != net.topology.weight_count())
        throw ParseError("$.weights: expected " + std::to_string(net.topology.weight_count()) + " values, found " +
                         std::to_string(net.weights.size()));
    net.input_scaler = scaler_from(field(doc, "input_scaler", root), "$.input_scaler");
    net.output_scaler = scaler_from(field(doc, "output_scaler", root), "$.output_scaler");

    if (doc.contains("provenance")) {
        const auto& p = doc["provenance"];
        net.provenance.strategy = p.value("strategy", "");
        net.provenance.output_id = p.value("output_id", "");
        net.provenance.train_mrp = p.value("train_mrp", 0.0);
        net.provenance.test_mrp = p.value("test_mrp", -1.0);
        net.provenance.seed = p.value("seed", std::uint64_t{0});
    }
    try {
        net.validate();
    } catch (const Error& e) {
        throw ParseError(std::string("$: ") + e.what());
    }
    return net;
}

std::string serialize(const NeuralNet& net) { return to_json(net).dump(2); }

NeuralNet deserialize(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("$: malformed JSON: ") + e.what());
    }
    return net_from_json(doc);
}

}  // namespace calibkit
