#include <doctest.h>

#include <random>
#include <set>

#include "calibkit/analysis.hpp"
#include "calibkit/calibration.hpp"
#include "calibkit/doe.hpp"
#include "calibkit/hydration.hpp"
#include "calibkit/mlp.hpp"
#include "calibkit/optimizer.hpp"
#include "calibkit/trainer.hpp"
#include "test_support.hpp"

using namespace calibkit;

namespace {

std::mt19937_64& gen() {
    static std::mt19937_64 g(20240611);
    return g;
}

double unif(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen()); }
int uint_in(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen()); }

}  // namespace

TEST_CASE("property: simulated curves are non-decreasing and bounded by alpha_inf") {
    const TimeGrid grid(0.01, 1000.0, 120);
    for (int trial = 0; trial < 60; ++trial) {
        const StandardizedParams p(unif(), unif(), unif(), unif());
        const double temp = unif(5.0, 60.0);
        const ThermalConditions cond{temp, unif(0.0, 60000.0)};
        const Eigen::VectorXd a = simulate(p, grid, cond).alpha;
        const double ainf = destandardize(p).alpha_inf;
        CAPTURE(p.p.transpose());
        CHECK(a.minCoeff() >= 0.0);
        CHECK(a.maxCoeff() <= ainf);
        for (int k = 1; k < a.size(); ++k) CHECK(a[k] >= a[k - 1]);
    }
}

TEST_CASE("property: standardization round trip") {
    for (int trial = 0; trial < 200; ++trial) {
        const StandardizedParams p(unif(), unif(), unif(), unif());
        CHECK((standardize(destandardize(p)).p - p.p).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("property: every LHS column is a permutation of the strata") {
    for (int trial = 0; trial < 25; ++trial) {
        const int n = uint_in(2, 60), dim = uint_in(1, 6);
        const Design d = generate_lhs(n, dim, gen()(), uint_in(0, 400));
        for (int c = 0; c < dim; ++c) {
            std::set<long> s;
            for (int i = 0; i < n; ++i) s.insert(std::lround(d.points(i, c) * n - 0.5));
            CHECK(static_cast<int>(s.size()) == n);
            CHECK(*s.begin() == 0);
            CHECK(*s.rbegin() == n - 1);
        }
        CHECK(d.discrepancy <= d.initial_discrepancy);
    }
}

TEST_CASE("property: Spearman is symmetric, bounded and rank invariant") {
    for (int trial = 0; trial < 100; ++trial) {
        const int n = uint_in(3, 40);
        Eigen::VectorXd x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = std::round(unif(0, 10));  // ties likely
            y[i] = unif(-1, 1);
        }
        if (x.maxCoeff() == x.minCoeff()) continue;
        const double r = spearman(x, y);
        CHECK(std::abs(r) <= 1.0 + 1e-12);
        CHECK(spearman(y, x) == doctest::Approx(r).epsilon(1e-12));
        CHECK(spearman(Eigen::VectorXd(x.unaryExpr([](double v) { return std::exp(v); })), y) == doctest::Approx(r).epsilon(1e-12));
        CHECK(spearman(Eigen::VectorXd(-x), y) == doctest::Approx(-r).epsilon(1e-12));
    }
}

TEST_CASE("property: PCA reconstructs training rows exactly") {
    for (int trial = 0; trial < 20; ++trial) {
        const int n = uint_in(2, 25), m = uint_in(2, 40);
        const Eigen::MatrixXd x = test_support::random_matrix(n, m, static_cast<unsigned>(trial));
        const PcaModel p = pca_fit(x);
        CHECK(p.components() <= std::min(n - 1, m));
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd row = x.row(i).transpose();
            CHECK((pca_reconstruct(p, pca_project(p, row)) - row).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("property: scalers and net serialization round trip") {
    for (int trial = 0; trial < 30; ++trial) {
        const NetTopology t{uint_in(1, 8), uint_in(1, 13), uint_in(1, 3),
                            trial % 2 ? OutputActivation::Linear : OutputActivation::Sigmoid};
        NeuralNet net = make_net(t, random_weights(t, gen()()));
        const Eigen::MatrixXd x = 10.0 * test_support::random_matrix(6, t.n_inputs, trial).array() - 5.0;
        const Eigen::MatrixXd y = test_support::random_matrix(6, t.n_outputs, trial + 100);
        net.input_scaler = AffineScaler::fit(x, 0.0, 1.0);
        net.output_scaler = AffineScaler::fit(y, 0.1, 0.9);
        CHECK((net.input_scaler.unscale_rows(net.input_scaler.scale_rows(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
        const NeuralNet back = deserialize(serialize(net));
        CHECK(forward_batch(back, x) == forward_batch(net, x));
        if (t.output_activation == OutputActivation::Sigmoid) {
            const Eigen::MatrixXd s = forward_scaled(t, net.weights, net.input_scaler.scale_rows(x));
            CHECK((s.array() > 0.0).all());
            CHECK((s.array() < 1.0).all());
        }
    }
}

TEST_CASE("property: folds partition the samples") {
    for (int trial = 0; trial < 50; ++trial) {
        const int v = uint_in(2, 12);
        const int n = uint_in(v, 200);
        const auto folds = fold_partition(n, v, gen()());
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        std::size_t lo = folds[0].size(), hi = lo;
        for (const auto& f : folds) {
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
            for (int i : f) ++seen[static_cast<std::size_t>(i)];
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("property: resampling stays within the observed range and keeps monotonicity") {
    for (int trial = 0; trial < 50; ++trial) {
        const int n = uint_in(2, 30);
        ObservedCurve c;
        c.times.resize(n);
        c.values.resize(n);
        double t = unif(0.01, 1.0), v = 0.0;
        for (int i = 0; i < n; ++i) {
            c.times[i] = t;
            c.values[i] = v;
            t *= unif(1.01, 3.0);
            v += unif(0.0, 0.05);
        }
        c.time_shift = unif(0.0, 2.0);
        const TimeGrid g(0.001, 5000.0, 200);
        const Resampled r = resample_to_grid(c, g);
        CHECK(r.values.minCoeff() >= c.values.minCoeff());
        CHECK(r.values.maxCoeff() <= c.values.maxCoeff());
        for (int k = 1; k < r.values.size(); ++k) CHECK(r.values[k] >= r.values[k - 1]);
        for (int k = 0; k < g.size(); ++k)
            if (g[k] > c.corrected_times()[n - 1]) CHECK(r.values[k] == c.values[n - 1]);
    }
}

TEST_CASE("property: optimizer best-so-far never increases and stays in the box") {
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = uint_in(1, 5);
        OptimizerConfig c = OptimizerConfig::unit_cube(dim, gen()());
        c.budget = uint_in(50, 1500);
        const Eigen::VectorXd centre = test_support::random_matrix(dim, 1, static_cast<unsigned>(trial)).col(0);
        const OptimizerResult r =
            minimize(Objective([&](const Eigen::VectorXd& x) { return (x - centre).cwiseAbs().sum(); }), c);
        CHECK(r.evaluations == c.budget);
        CHECK(static_cast<int>(r.best_trace.size()) == c.budget);
        for (std::size_t i = 1; i < r.best_trace.size(); ++i) CHECK(r.best_trace[i] <= r.best_trace[i - 1]);
        CHECK((r.best_point.array() >= 0.0).all());
        CHECK((r.best_point.array() <= 1.0).all());
    }
}
