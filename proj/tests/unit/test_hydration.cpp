#include <doctest.h>

#include "calibkit/csv.hpp"
#include "calibkit/hydration.hpp"
#include "test_support.hpp"

using namespace calibkit;

TEST_CASE("standardization round trip and bounds") {
    const PhysicalParams lo{0.1, 1e-6, 2.0, 0.7};
    const PhysicalParams hi{1.0, 1e-3, 12.0, 1.0};
    CHECK((standardize(lo).p - Vector4::Zero()).norm() < 1e-12);
    CHECK((standardize(hi).p - Vector4::Ones()).norm() < 1e-12);

    const StandardizedParams mid(0.5, 0.5, 0.5, 0.5);
    const PhysicalParams m = destandardize(mid);
    CHECK(m.b1 == doctest::Approx(0.55));
    CHECK(m.b2 == doctest::Approx(std::pow(10.0, -4.5)));
    CHECK(m.eta_bar == doctest::Approx(7.0));
    CHECK(m.alpha_inf == doctest::Approx(0.85));

    const StandardizedParams q(0.13, 0.77, 0.4, 0.91);
    CHECK((standardize(destandardize(q)).p - q.p).norm() < 1e-12);

    CHECK_THROWS_AS(destandardize(StandardizedParams(1.2, 0.5, 0.5, 0.5)), DomainError);
    CHECK_NOTHROW(destandardize_extrapolated(StandardizedParams(1.2, 0.5, -0.1, 0.5)));
    CHECK_THROWS_AS(destandardize_extrapolated(StandardizedParams(-0.2, 0.5, 0.5, 0.5)), DomainError);
}

TEST_CASE("affinity vanishes at alpha_inf and rejects out-of-range alpha") {
    const PhysicalParams k;
    CHECK(affinity25(k.alpha_inf, k) == doctest::Approx(0.0));
    CHECK(affinity25(0.0, k) == doctest::Approx(k.b1 * k.b2));
    CHECK_THROWS_AS(affinity25(-0.01, k), DomainError);
    CHECK_THROWS_AS(affinity25(k.alpha_inf + 0.01, k), DomainError);
}

TEST_CASE("Arrhenius factor") {
    CHECK(arrhenius_factor({25.0, 40000.0}) == doctest::Approx(1.0));
    CHECK(arrhenius_factor({35.0, 0.0}) == doctest::Approx(1.0));
    const double ea = activation_energy_for_factor(1.651, 35.0);
    // Independent: Ea = R ln(f) / (1/298.15 - 1/308.15)
    CHECK(ea == doctest::Approx(8.314 * std::log(1.651) / (1.0 / 298.15 - 1.0 / 308.15)).epsilon(1e-12));
    CHECK(arrhenius_factor({35.0, ea}) == doctest::Approx(1.651).epsilon(1e-12));
}

TEST_CASE("time grid") {
    const TimeGrid g;
    CHECK(g.size() == 1161);
    CHECK(g[0] == doctest::Approx(1e-2));
    CHECK(g[1160] == doctest::Approx(1e3));
    CHECK(g.at_component(1) == g[0]);
    const double r = g[1] / g[0];
    for (int k = 1; k < g.size(); ++k) CHECK(g[k] / g[k - 1] == doctest::Approx(r).epsilon(1e-9));
    CHECK_THROWS(TimeGrid(1.0, 0.5, 10));
    Eigen::VectorXd bad(3);
    bad << 1.0, 1.0, 2.0;
    CHECK_THROWS(TimeGrid(bad));
}

TEST_CASE("simulation matches an independent high-accuracy reference") {
    Eigen::VectorXd times;
    const Eigen::MatrixXd ref = csv::read_bundle(test_support::fixture("reference_curve_p05.csv"), times);
    const TimeGrid grid(times);
    const HydrationCurve c = simulate(StandardizedParams(0.5, 0.5, 0.5, 0.5), grid);
    CHECK((c.alpha - ref.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("RK4 converges at fourth order") {
    const TimeGrid grid;
    const StandardizedParams p(0.5, 0.5, 0.5, 0.5);
    auto run = [&](int n) {
        IntegratorOptions o;
        o.fixed_substeps = n;
        return simulate(p, grid, {}, o).alpha;
    };
    const Eigen::VectorXd a1 = run(1), a2 = run(2), a4 = run(4);
    const double d1 = (a1 - a2).cwiseAbs().maxCoeff();
    const double d2 = (a2 - a4).cwiseAbs().maxCoeff();
    CHECK(d1 / d2 >= 8.0);
}

TEST_CASE("temperature scaling equals time scaling") {
    const StandardizedParams p(0.3, 0.6, 0.4, 0.7);
    const double ea = activation_energy_for_factor(1.651, 35.0);
    Eigen::VectorXd t(3);
    t << 1.0, 10.0, 100.0;
    const HydrationCurve hot = simulate(p, TimeGrid(t), {35.0, ea});
    const HydrationCurve cold = simulate(p, TimeGrid(Eigen::VectorXd(1.651 * t)));
    CHECK((hot.alpha - cold.alpha).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("bundle rows equal single simulations and are monotone") {
    const TimeGrid grid(0.01, 1000.0, 200);
    Eigen::MatrixXd design(3, 4);
    design << 0, 0, 0, 0, 1, 1, 1, 1, 0.2, 0.9, 0.1, 0.6;
    const Eigen::MatrixXd bundle = simulate_bundle(design, grid, {}, 2);
    for (int i = 0; i < 3; ++i) {
        const StandardizedParams p(Vector4(design.row(i).transpose()));
        CHECK((bundle.row(i).transpose() - simulate(p, grid).alpha).norm() == 0.0);
        const double ainf = destandardize(p).alpha_inf;
        for (int k = 0; k < grid.size(); ++k) {
            CHECK(bundle(i, k) >= 0.0);
            CHECK(bundle(i, k) <= ainf + 1e-12);
            if (k > 0) CHECK(bundle(i, k) >= bundle(i, k - 1));
        }
    }
}

TEST_CASE("heat conversion") {
    Eigen::VectorXd q(3);
    q << 0.0, 250.0, 600.0;
    const HeatConversion h = heat_to_alpha(q, 500.0);
    CHECK(h.alpha[1] == doctest::Approx(0.5));
    CHECK(h.out_of_range);
    CHECK_THROWS_AS(heat_to_alpha(q, -1.0), DomainError);
}
