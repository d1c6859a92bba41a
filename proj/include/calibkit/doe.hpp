#ifndef CALIBKIT_DOE_HPP
#define CALIBKIT_DOE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calibkit/errors.hpp"

namespace calibkit {

enum class DesignKind { LhsOptimized, UniformRandom };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(const std::string& name);

struct Design {
    Eigen::MatrixXd points;  // n x dim, every entry in [0, 1]
    DesignKind kind = DesignKind::UniformRandom;
    std::uint64_t seed = 0;
    double discrepancy = 0.0;          // squared centered L2 discrepancy of `points`
    double initial_discrepancy = 0.0;  // before optimization (LHS only)
    std::vector<double> accepted_scores;  // score after each accepted swap (LHS only)
};

/// Squared centered L2 discrepancy (Hickernell's closed form):
///
///   CD^2 = (13/12)^d
///        - 2/n   sum_i prod_k (1 + |x_ik - 1/2|/2 - |x_ik - 1/2|^2/2)
///        + 1/n^2 sum_ij prod_k (1 + |x_ik - 1/2|/2 + |x_jk - 1/2|/2 - |x_ik - x_jk|/2)
///
/// Rows are points. Throws DomainError for points outside the unit cube.
template <class Derived>
double centered_l2_discrepancy(const Eigen::MatrixBase<Derived>& x) {
    const Eigen::Index n = x.rows(), d = x.cols();
    if (n == 0) throw DomainError("discrepancy of an empty design");
    if ((x.array() < 0.0).any() || (x.array() > 1.0).any())
        throw DomainError("design point outside the unit cube");
    const auto c = (x.array() - 0.5).abs().eval();
    double single = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        single += (1.0 + 0.5 * c.row(i) - 0.5 * c.row(i).square()).prod();
    double pair = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            pair += (1.0 + 0.5 * c.row(i) + 0.5 * c.row(j) - 0.5 * (x.row(i) - x.row(j)).array().abs()).prod();
    const double nn = static_cast<double>(n);
    return std::pow(13.0 / 12.0, static_cast<double>(d)) - 2.0 / nn * single + pair / (nn * nn);
}

/// Latin hypercube with points at stratum centers (i + 0.5)/n, improved by
/// greedy in-column swaps that lower the centered L2 discrepancy. Every swap
/// keeps the stratification intact.
Design generate_lhs(int n, int dim, std::uint64_t seed, int iterations = 10000);

/// i.i.d. uniform points.
Design generate_random(int n, int dim, std::uint64_t seed);

}  // namespace calibkit

#endif
