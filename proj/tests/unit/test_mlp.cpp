#include <doctest.h>

#include <random>

#include "calibkit/errors.hpp"
#include "calibkit/mlp.hpp"
#include "test_support.hpp"

using namespace calibkit;

namespace {

double fd_max_relative_error(const NetTopology& t, const Eigen::VectorXd& w, const Eigen::MatrixXd& x,
                             const Eigen::MatrixXd& y) {
    const Eigen::VectorXd g = loss_gradient_scaled(t, w, x, y).gradient;
    double worst = 0.0;
    for (int i = 0; i < w.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
        Eigen::VectorXd wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        const double fd = (loss_gradient_scaled(t, wp, x, y).loss - loss_gradient_scaled(t, wm, x, y).loss) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-6, std::max(std::abs(fd), std::abs(g[i]))));
    }
    return worst;
}

}  // namespace

TEST_CASE("forward pass of a hand-sized net") {
    NetTopology t{2, 2, 1, OutputActivation::Sigmoid};
    Eigen::VectorXd w(t.weight_count());
    // hidden 0: bias, x0, x1 | hidden 1 | output: bias, h0, h1
    w << 0.1, 0.2, -0.3, -0.4, 0.5, 0.6, 0.7, -0.8, 0.9;
    const NeuralNet net = make_net(t, w);
    Eigen::VectorXd x(2);
    x << 0.25, 0.75;
    const double h0 = 1 / (1 + std::exp(-(0.1 + 0.2 * 0.25 - 0.3 * 0.75)));
    const double h1 = 1 / (1 + std::exp(-(-0.4 + 0.5 * 0.25 + 0.6 * 0.75)));
    const double o = 1 / (1 + std::exp(-(0.7 - 0.8 * h0 + 0.9 * h1)));
    CHECK(forward(net, x)[0] == doctest::Approx(o).epsilon(1e-14));

    NeuralNet lin = net;
    lin.topology.output_activation = OutputActivation::Linear;
    CHECK(forward(lin, x)[0] == doctest::Approx(0.7 - 0.8 * h0 + 0.9 * h1).epsilon(1e-14));
}

TEST_CASE("weight count") {
    CHECK(NetTopology{4, 7, 1}.weight_count() == 5 * 7 + 8);
    CHECK(NetTopology{5, 3, 2}.weight_count() == 6 * 3 + 4 * 2);
    CHECK_THROWS_AS((NetTopology{4, 0, 1}.validate()), ConfigError);
}

TEST_CASE("backprop gradient agrees with central differences") {
    std::mt19937 gen(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = 1 + trial % 13;
        for (auto act : {OutputActivation::Sigmoid, OutputActivation::Linear}) {
            const NetTopology t{4, h, trial % 3 == 0 ? 2 : 1, act};
            const Eigen::VectorXd w = random_weights(t, 100 + trial);
            const Eigen::MatrixXd x = test_support::random_matrix(15, 4, trial);
            const Eigen::MatrixXd y = 0.1 + 0.8 * test_support::random_matrix(15, t.n_outputs, 50 + trial).array();
            CAPTURE(h);
            CHECK(fd_max_relative_error(t, w, x, y) < 1e-5);
        }
    }
}

TEST_CASE("loss and absolute error sums") {
    const NetTopology t{3, 4, 2};
    const Eigen::VectorXd w = random_weights(t, 3);
    const Eigen::MatrixXd x = test_support::random_matrix(9, 3, 1);
    const Eigen::MatrixXd y = test_support::random_matrix(9, 2, 2);
    const LossGradient lg = loss_gradient_scaled(t, w, x, y);
    const Eigen::MatrixXd e = forward_scaled(t, w, x) - y;
    CHECK(lg.loss == doctest::Approx(e.squaredNorm()));
    CHECK(lg.abs_error_sum == doctest::Approx(e.cwiseAbs().sum()));
    CHECK(lg.abs_error_by_output[1] == doctest::Approx(e.col(1).cwiseAbs().sum()));
}

TEST_CASE("random weights are bounded and reproducible") {
    const NetTopology t{4, 9, 1};
    const Eigen::VectorXd a = random_weights(t, 8);
    CHECK(a == random_weights(t, 8));
    CHECK(a != random_weights(t, 9));
    CHECK(a.cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("affine scaler") {
    Eigen::MatrixXd s(3, 2);
    s << 1, 10, 3, 20, 2, 30;
    const AffineScaler sc = AffineScaler::fit(s, 0.1, 0.9);
    const Eigen::MatrixXd z = sc.scale_rows(s);
    CHECK(z.colwise().minCoeff().isApproxToConstant(0.1));
    CHECK(z.colwise().maxCoeff().isApproxToConstant(0.9));
    CHECK((sc.unscale_rows(z) - s).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd flat(2, 1);
    flat << 4, 4;
    CHECK_THROWS_AS(AffineScaler::fit(flat, 0, 1), ConfigError);
}

TEST_CASE("raw gradient equals scaled gradient on scaled data") {
    NeuralNet net = make_net({2, 3, 1}, random_weights({2, 3, 1}, 4));
    const Eigen::MatrixXd x = 5.0 * test_support::random_matrix(10, 2, 6).array();
    const Eigen::MatrixXd y = 3.0 + test_support::random_matrix(10, 1, 7).array();
    net.input_scaler = AffineScaler::fit(x, 0, 1);
    net.output_scaler = AffineScaler::fit(y, 0.1, 0.9);
    const LossGradient a = gradient(net, x, y);
    const LossGradient b =
        loss_gradient_scaled(net.topology, net.weights, net.input_scaler.scale_rows(x), net.output_scaler.scale_rows(y));
    CHECK((a.gradient - b.gradient).norm() < 1e-14);
    CHECK((forward_batch(net, x) - net.output_scaler.unscale_rows(forward_scaled(net.topology, net.weights,
                                                                                 net.input_scaler.scale_rows(x))))
              .norm() < 1e-14);
}

TEST_CASE("serialization round trip is exact") {
    NeuralNet net = make_net({4, 6, 1, OutputActivation::Linear}, random_weights({4, 6, 1}, 11));
    net.input_scaler = AffineScaler::fit(test_support::random_matrix(8, 4, 1), 0, 1);
    net.output_scaler = AffineScaler::fit(test_support::random_matrix(8, 1, 2), 0.1, 0.9);
    net.provenance = {"InvExp", "p3", 0.5, 0.75, 42};
    const NeuralNet back = deserialize(serialize(net));
    CHECK(back.weights == net.weights);
    CHECK(back.topology.output_activation == OutputActivation::Linear);
    CHECK(back.input_scaler.data_max == net.input_scaler.data_max);
    CHECK(back.output_scaler.target_lo == 0.1);
    CHECK(back.provenance.output_id == "p3");
    CHECK(back.provenance.seed == 42);
    const Eigen::MatrixXd x = test_support::random_matrix(5, 4, 3);
    CHECK(forward_batch(back, x) == forward_batch(net, x));
    CHECK(serialize(back) == serialize(net));
}

TEST_CASE("malformed net documents raise ParseError naming the field") {
    const NeuralNet net = make_net({2, 2, 1}, random_weights({2, 2, 1}, 1));
    auto doc = to_json(net);

    auto expect_field = [](const nlohmann::json& d, const std::string& field) {
        try {
            net_from_json(d);
            FAIL("no exception");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    auto d1 = doc;
    d1["version"] = 99;
    expect_field(d1, "version");
    auto d2 = doc;
    d2["weights"].erase(0);
    expect_field(d2, "weights");
    auto d3 = doc;
    d3.erase("topology");
    expect_field(d3, "topology");
    CHECK_THROWS_AS(deserialize("{not json"), ParseError);
}
