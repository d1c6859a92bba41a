#include <doctest.h>

#include <numeric>
#include <set>

#include "calibkit/errors.hpp"
#include "calibkit/trainer.hpp"
#include "test_support.hpp"

using namespace calibkit;

TEST_CASE("MRP error by hand") {
    Eigen::MatrixXd o(4, 1), t(4, 1);
    o << 1.0, 2.0, 3.0, 4.0;
    t << 1.5, 2.0, 2.0, 4.0;
    // 100 * (0.5 + 0 + 1 + 0) / (4 * (10 - 0)) = 3.75
    CHECK(mrp_error(o, t, 0.0, 10.0) == doctest::Approx(3.75));
    CHECK_THROWS(mrp_error(o, t, 1.0, 1.0));
}

TEST_CASE("windowed error ratio") {
    std::vector<double> trace(11);
    std::iota(trace.begin(), trace.end(), 1.0);  // 1..11
    // J = 3, k = 10: (8+9+10+11) / (5+6+7)
    CHECK(pe_ratio(trace, 10, 3) == doctest::Approx(38.0 / 18.0));
    CHECK(std::isnan(pe_ratio(trace, 5, 3)));
    CHECK_FALSE(std::isnan(pe_ratio(trace, 6, 3)));

    // A constant sequence: J + 1 recent terms over J previous ones.
    const std::vector<double> flat(301, 2.0);
    CHECK(pe_ratio(flat, 300, 100) == doctest::Approx(1.01));
    CHECK(ratio_stop(flat, 100, 0.999));
    CHECK_FALSE(ratio_stop(std::vector<double>(200, 2.0), 100, 0.999));

    const std::vector<double> zeros(7, 0.0);
    CHECK(pe_ratio(zeros, 6, 3) == 1.0);
}

TEST_CASE("conjugate gradient solves a quadratic bowl") {
    const int n = 12;
    const Eigen::MatrixXd m = test_support::random_matrix(n, n, 5);
    const Eigen::MatrixXd a = m.transpose() * m + 0.5 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd b = test_support::random_matrix(n, 1, 6).col(0);
    const Eigen::VectorXd exact = a.ldlt().solve(b);
    const CgObjective f = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g, double& aux) {
        g = a * w - b;
        aux = 0.0;
        return 0.5 * w.dot(a * w) - b.dot(w);
    };
    CgOptions o;
    o.max_iters = 500;
    o.gradient_tolerance = 1e-9;
    const CgResult r = minimize_cg(f, Eigen::VectorXd::Zero(n), o);
    CHECK((r.w - exact).norm() < 1e-6 * exact.norm());
    CHECK((r.stop_reason == "gradient" || r.stop_reason == "line_search"));
    CHECK(r.iterations < 100);
}

TEST_CASE("conjugate gradient on Rosenbrock and the callback") {
    const CgObjective f = [](const Eigen::VectorXd& w, Eigen::VectorXd& g, double& aux) {
        const double x = w[0], y = w[1];
        g.resize(2);
        g << -2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x);
        aux = x;
        return (1 - x) * (1 - x) + 100 * (y - x * x) * (y - x * x);
    };
    CgOptions o;
    o.max_iters = 5000;
    Eigen::VectorXd w0(2);
    w0 << -1.2, 1.0;
    const CgResult r = minimize_cg(f, w0, o);
    CHECK(r.value < 1e-10);

    int calls = 0;
    double last = 1e300;
    bool monotone = true;
    const CgResult s = minimize_cg(f, w0, o, [&](int, const Eigen::VectorXd&, double v, double) {
        monotone = monotone && v <= last;
        last = v;
        return ++calls == 5;
    });
    CHECK(s.iterations == 5);
    CHECK(s.stop_reason == "callback");
    CHECK(monotone);
}

TEST_CASE("fold partition") {
    const auto folds = fold_partition(23, 5, 9);
    CHECK(folds.size() == 5);
    std::set<int> all;
    for (const auto& f : folds) {
        CHECK((f.size() == 4 || f.size() == 5));
        all.insert(f.begin(), f.end());
    }
    CHECK(all.size() == 23);
    CHECK(*all.rbegin() == 22);
    CHECK(fold_partition(23, 5, 9) == folds);
    CHECK_THROWS_AS(fold_partition(3, 5, 1), ConfigError);
}

TEST_CASE("hidden-size growth counts ratio exceedances cumulatively") {
    TrainConfig c;
    c.max_exceed = 3;
    c.cve_ratio_max = 0.99;
    // ratios: -, 0.5, 1.2 (x1), 0.5, 1.0 (x2), 0.9, 1.5 (x3) -> stop at h = 7
    const std::vector<double> errs = {8, 4, 4.8, 2.4, 2.4, 2.16, 3.24, 0.1};
    const CvSearch s = search_hidden_size(c, [&](int h) { return errs[static_cast<std::size_t>(h - 1)]; });
    REQUIRE(s.steps.size() == 7);
    CHECK(s.stop_reason == "max_exceed");
    CHECK(std::isnan(s.steps[0].ratio));
    CHECK(s.steps[2].exceed_count == 1);
    CHECK(s.steps[4].exceed_count == 2);
    CHECK(s.steps[6].exceed_count == 3);
    CHECK(s.chosen_h == 6);

    // Ties go to the smaller size; the cap stops growth.
    c.h_max = 4;
    const CvSearch t = search_hidden_size(c, [](int h) { return h == 2 || h == 4 ? 1.0 : 3.0; });
    CHECK(t.stop_reason == "h_max");
    CHECK(t.chosen_h == 2);
}

TEST_CASE("training config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.ratio_window = 3000;  // 2J > K
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.pe_ratio_max = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.v_folds = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

void smooth_problem(Eigen::MatrixXd& x, Eigen::MatrixXd& y, int n, unsigned seed) {
    x = test_support::random_matrix(n, 2, seed);
    y.resize(n, 1);
    for (int i = 0; i < n; ++i) y(i, 0) = std::sin(2.0 * x(i, 0)) + x(i, 1) * x(i, 1);
}

}  // namespace

TEST_CASE("training lowers the error and stops by the ratio rule") {
    Eigen::MatrixXd x, y;
    smooth_problem(x, y, 40, 1);
    TrainConfig c;
    c.max_iters = 2000;
    c.ratio_window = 50;
    NeuralNet net = make_net({2, 4, 1}, random_weights({2, 4, 1}, 3));
    net.input_scaler = AffineScaler::fit(x, 0, 1);
    net.output_scaler = AffineScaler::fit(y, 0.1, 0.9);
    const TrainResult r = train_weights(net, x, y, c, y.minCoeff(), y.maxCoeff());
    CHECK(r.trace.size() == static_cast<std::size_t>(r.iterations + 1));
    CHECK(r.trace.back() < 0.25 * r.trace.front());
    CHECK(r.trace.back() == doctest::Approx(evaluate_mrp(r.net, x, y, y.minCoeff(), y.maxCoeff())));
    if (r.stop_reason == "pe_ratio") CHECK(ratio_stop(r.trace, c.ratio_window, c.pe_ratio_max));
}

TEST_CASE("cross-validation report is consistent and reproducible") {
    Eigen::MatrixXd x, y;
    smooth_problem(x, y, 30, 2);
    TrainConfig c;
    c.v_folds = 3;
    c.max_iters = 300;
    c.ratio_window = 30;
    c.max_exceed = 2;
    c.h_max = 5;
    c.seed = 77;
    const TrainReport a = cross_validate(x, y, c);
    CHECK(a.steps.size() == a.folds.size());
    CHECK(a.chosen_h >= 1);
    CHECK(a.final_net.topology.n_hidden == a.chosen_h);
    double cv = 0.0;
    int idx = a.chosen_h - c.h_min;
    for (const auto& f : a.folds[static_cast<std::size_t>(idx)]) cv += f.heldout_mrp;
    CHECK(cv / c.v_folds == doctest::Approx(a.steps[static_cast<std::size_t>(idx)].cv_error));
    for (const auto& s : a.steps) CHECK(a.steps[static_cast<std::size_t>(idx)].cv_error <= s.cv_error);
    CHECK(a.train_mrp == a.folds[static_cast<std::size_t>(idx)][static_cast<std::size_t>(a.chosen_fold)].train_mrp);

    c.jobs = 2;
    const TrainReport b = cross_validate(x, y, c);
    CHECK(b.final_net.weights == a.final_net.weights);
    CHECK(to_json(b).dump() == to_json(a).dump());
}

TEST_CASE("non-finite training data diverges") {
    Eigen::MatrixXd x, y;
    smooth_problem(x, y, 20, 3);
    NeuralNet net = make_net({2, 2, 1}, random_weights({2, 2, 1}, 3));
    net.input_scaler = AffineScaler::fit(x, 0, 1);
    net.output_scaler = AffineScaler::fit(y, 0.1, 0.9);
    y(4, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig c;
    c.max_iters = 50;
    c.ratio_window = 5;
    CHECK_THROWS_AS(train_weights(net, x, y, c, 0.0, 2.0), TrainingDivergence);
}
