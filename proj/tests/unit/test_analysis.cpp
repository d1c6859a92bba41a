#include <doctest.h>

#include "calibkit/analysis.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/doe.hpp"
#include "calibkit/hydration.hpp"
#include "test_support.hpp"

using namespace calibkit;

TEST_CASE("average ranks with ties") {
    Eigen::VectorXd x(6);
    x << 10, 20, 20, 5, 20, 1;
    Eigen::VectorXd expect(6);
    expect << 3, 5, 5, 2, 5, 1;
    CHECK(average_ranks(x) == expect);
}

TEST_CASE("Spearman matches scipy with ties") {
    const auto o = test_support::oracles()["spearman_ties"];
    const auto x = o["x"].get<std::vector<double>>();
    const auto y = o["y"].get<std::vector<double>>();
    const Eigen::VectorXd ex = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    const Eigen::VectorXd ey = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
    CHECK(spearman(ex, ey) == doctest::Approx(o["rho"].get<double>()).epsilon(1e-12));
}

TEST_CASE("Spearman is exactly +-1 on monotone pairs") {
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(30, -2.0, 5.0);
    const Eigen::VectorXd up = x.array().exp();
    const Eigen::VectorXd down = -x.array().cube();
    CHECK(spearman(x, up) == 1.0);
    CHECK(spearman(x, down) == -1.0);
}

TEST_CASE("Spearman errors") {
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(5, 0, 1);
    CHECK_THROWS_AS(spearman(a, Eigen::VectorXd::Constant(5, 2.0)), UndefinedCorrelation);
    CHECK_THROWS_AS(spearman(a, Eigen::VectorXd::Zero(4)), ShapeError);
}

TEST_CASE("sensitivity table marks constant responses undefined") {
    const Eigen::MatrixXd design = test_support::random_matrix(20, 4, 3);
    Eigen::MatrixXd resp(20, 3);
    resp.col(0) = design.col(1);
    resp.col(1).setConstant(0.4);
    resp.col(2) = -design.col(3);
    const SensitivityMatrix s = sensitivity_table(design, resp);
    CHECK(s.rho(1, 0) == 1.0);
    CHECK(s.rho(3, 2) == -1.0);
    CHECK_FALSE(s.defined(0, 1));
    CHECK(std::isnan(s.rho(2, 1)));
    CHECK(s.defined(0, 0));
}

TEST_CASE("PCA of a simulated bundle") {
    const TimeGrid grid(0.01, 1000.0, 300);
    const Eigen::MatrixXd design = generate_lhs(100, 4, 4, 500).points;
    const Eigen::MatrixXd bundle = simulate_bundle(design, grid);
    const PcaModel m = pca_fit(bundle);

    for (int c = 1; c < m.components(); ++c) CHECK(m.variances[c] <= m.variances[c - 1]);
    const Eigen::MatrixXd gram = m.basis.transpose() * m.basis;
    CHECK((gram - Eigen::MatrixXd::Identity(m.components(), m.components())).cwiseAbs().maxCoeff() < 1e-10);
    for (int c = 0; c < m.components(); ++c) CHECK(m.basis.col(c).sum() >= 0.0);
    CHECK(m.explained_ratio().sum() == doctest::Approx(1.0));

    double worst = 0.0;
    for (int i = 0; i < bundle.rows(); ++i) {
        const Eigen::VectorXd row = bundle.row(i).transpose();
        worst = std::max(worst, (pca_reconstruct(m, pca_project(m, row)) - row).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-8);

    // Independent check: variances equal the eigenvalues of the sample covariance.
    const Eigen::MatrixXd centered = bundle.rowwise() - bundle.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(bundle.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ev = es.eigenvalues().reverse();
    for (int c = 0; c < 5; ++c) CHECK(m.variances[c] == doctest::Approx(ev[c]).epsilon(1e-8));

    CHECK(pca_project(m, bundle.row(0).transpose(), 3).size() == 3);
}

TEST_CASE("PCA of identical rows has no components") {
    const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(5, 8);
    const PcaModel m = pca_fit(same);
    CHECK(m.components() == 0);
    CHECK_FALSE(m.warning.empty());
}
