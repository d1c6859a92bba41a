#include <doctest.h>

#include "calibkit/doe.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/optimizer.hpp"
#include "test_support.hpp"

using namespace calibkit;

namespace {

double sphere(const Eigen::VectorXd& x) { return (x.array() - 0.3).square().sum(); }

double rosenbrock(const Eigen::VectorXd& x) {
    return (1 - x[0]) * (1 - x[0]) + 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
}

}  // namespace

TEST_CASE("sphere and Rosenbrock within budget") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const OptimizerResult s = minimize(Objective(sphere), OptimizerConfig::unit_cube(4, seed));
        CHECK(s.best_value < 1e-5);
        CHECK(s.evaluations == 10000);

        OptimizerConfig c = OptimizerConfig::unit_cube(2, seed);
        c.lower = Eigen::Vector2d(-2, -2);
        c.upper = Eigen::Vector2d(2, 2);
        const OptimizerResult r = minimize(Objective(rosenbrock), c);
        CHECK(r.best_value < 1e-2);
    }
}

TEST_CASE("best-so-far trace is monotone and matches the result") {
    OptimizerConfig c = OptimizerConfig::unit_cube(3, 9);
    c.budget = 777;
    const OptimizerResult r = minimize(Objective(sphere), c);
    REQUIRE(r.best_trace.size() == 777);
    for (std::size_t i = 1; i < r.best_trace.size(); ++i) CHECK(r.best_trace[i] <= r.best_trace[i - 1]);
    CHECK(r.best_trace.back() == r.best_value);
    CHECK(sphere(r.best_point) == r.best_value);
}

TEST_CASE("points stay in the box") {
    OptimizerConfig c = OptimizerConfig::unit_cube(2, 4);
    c.lower = Eigen::Vector2d(0.5, -1.0);
    c.upper = Eigen::Vector2d(0.7, -0.9);
    c.budget = 2000;
    bool inside = true;
    const Objective f = [&](const Eigen::VectorXd& x) {
        inside = inside && (x.array() >= c.lower.array()).all() && (x.array() <= c.upper.array()).all();
        return -x.sum();  // optimum at the upper corner
    };
    const OptimizerResult r = minimize(f, c);
    CHECK(inside);
    CHECK(r.best_point[0] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(r.best_point[1] == doctest::Approx(-0.9).epsilon(1e-6));
}

TEST_CASE("results depend only on the seed, not on jobs") {
    OptimizerConfig c = OptimizerConfig::unit_cube(4, 12);
    c.budget = 3000;
    const OptimizerResult a = minimize(Objective(sphere), c);
    c.jobs = 3;
    const OptimizerResult b = minimize(Objective(sphere), c);
    CHECK(a.best_point == b.best_point);
    CHECK(a.best_trace == b.best_trace);
    c.seed = 13;
    CHECK(minimize(Objective(sphere), c).best_point != a.best_point);
}

TEST_CASE("non-finite objective values never win") {
    OptimizerConfig c = OptimizerConfig::unit_cube(2, 3);
    c.budget = 1000;
    const Objective f = [](const Eigen::VectorXd& x) {
        return x[0] < 0.5 ? std::numeric_limits<double>::quiet_NaN() : sphere(x);
    };
    const OptimizerResult r = minimize(f, c);
    CHECK(std::isfinite(r.best_value));
    CHECK(r.best_point[0] >= 0.5);
}

TEST_CASE("invalid optimizer settings") {
    OptimizerConfig c = OptimizerConfig::unit_cube(4);
    c.pool_rate = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig::unit_cube(4);
    c.radioactivity = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig::unit_cube(4);
    c.upper[2] = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig::unit_cube(4);
    c.cross_limit = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("surrogate fit minimizes the squared response mismatch") {
    const TimeGrid grid;
    const Eigen::MatrixXd design = generate_lhs(20, 4, 1, 200).points;
    const Eigen::MatrixXd bundle = simulate_bundle(design, grid);
    BankTrainOptions o;
    o.train = test_support::quick_train();
    const SurrogateBank bank = train_bank(strategy_config(StrategyId::ForwSpli), design, bundle, grid, o);

    const Eigen::VectorXd target = predict_forward(bank, design.row(3)).row(0).transpose();
    OptimizerConfig c = OptimizerConfig::unit_cube(4, 5);
    c.budget = 10000;
    const SurrogateFit fit = fit_surrogate_response(bank, target, c);
    const Eigen::MatrixXd at = fit.p.p.transpose();
    CHECK(fit.delta == doctest::Approx((predict_forward(bank, at).row(0).transpose() - target).squaredNorm()));
    CHECK(fit.delta < 1e-5);
    CHECK(fit.evaluations == 10000);
    CHECK_THROWS_AS(fit_surrogate_response(bank, Eigen::VectorXd::Zero(3), c), ShapeError);

    const SurrogateBank inv = train_bank(strategy_config(StrategyId::InvExp), design, bundle, grid, o);
    CHECK_THROWS_AS(fit_surrogate_response(inv, target, c), ConfigError);
}

TEST_CASE("direct calibration recovers a simulated curve") {
    const TimeGrid grid(0.01, 1000.0, 150);
    const StandardizedParams truth(0.35, 0.6, 0.45, 0.7);
    const Eigen::VectorXd obs = simulate(truth, grid).alpha;
    OptimizerConfig c = OptimizerConfig::unit_cube(4, 2);
    c.budget = 4000;
    const SurrogateFit fit = direct_calibrate(obs, 1, grid, c);
    CHECK(fit.delta < 1e-5);
    CHECK(fit.delta == doctest::Approx(error_f1(simulate(fit.p, grid).alpha, obs)));
}
