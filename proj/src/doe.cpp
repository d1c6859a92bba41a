#include "calibkit/doe.hpp"

#include <numeric>

#include "calibkit/random.hpp"

namespace calibkit {

std::string to_string(DesignKind kind) {
    return kind == DesignKind::LhsOptimized ? "lhs_optimized" : "uniform_random";
}

DesignKind design_kind_from_string(const std::string& name) {
    if (name == "lhs_optimized") return DesignKind::LhsOptimized;
    if (name == "uniform_random") return DesignKind::UniformRandom;
    throw ConfigError("unknown design kind '" + name + "'");
}

namespace {

// Incremental bookkeeping for the centered L2 discrepancy under in-column swaps.
// Only the rows touched by a swap change, so a move costs O(n * dim).
class DiscrepancyTracker {
public:
    explicit DiscrepancyTracker(const Eigen::MatrixXd& x) : x_(x), n_(x.rows()), d_(x.cols()) {
        single_.resize(n_);
        pair_.resize(n_, n_);
        for (Eigen::Index i = 0; i < n_; ++i) single_[i] = single_term(x_.row(i));
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = 0; j < n_; ++j) pair_(i, j) = pair_term(x_.row(i), x_.row(j));
        base_ = std::pow(13.0 / 12.0, static_cast<double>(d_));
    }

    double score() const {
        const double nn = static_cast<double>(n_);
        return base_ - 2.0 / nn * single_.sum() + pair_.sum() / (nn * nn);
    }

    /// Change in score if column `col` of rows a and b were swapped.
    double swap_delta(Eigen::Index a, Eigen::Index b, Eigen::Index col) {
        row_a_ = x_.row(a);
        row_b_ = x_.row(b);
        std::swap(row_a_[col], row_b_[col]);

        new_pa_.resize(n_);
        new_pb_.resize(n_);
        for (Eigen::Index j = 0; j < n_; ++j) {
            if (j == a || j == b) continue;
            new_pa_[j] = pair_term(row_a_, x_.row(j));
            new_pb_[j] = pair_term(row_b_, x_.row(j));
        }
        new_pa_[a] = pair_term(row_a_, row_a_);
        new_pa_[b] = pair_term(row_a_, row_b_);
        new_pb_[a] = new_pa_[b];
        new_pb_[b] = pair_term(row_b_, row_b_);

        const double old_pairs = 2.0 * pair_.row(a).sum() + 2.0 * pair_.row(b).sum() - pair_(a, a) -
                                 pair_(b, b) - 2.0 * pair_(a, b);
        const double new_pairs = 2.0 * new_pa_.sum() + 2.0 * new_pb_.sum() - new_pa_[a] - new_pb_[b] -
                                 2.0 * new_pa_[b];
        new_sa_ = single_term(row_a_);
        new_sb_ = single_term(row_b_);
        const double nn = static_cast<double>(n_);
        return -2.0 / nn * (new_sa_ + new_sb_ - single_[a] - single_[b]) + (new_pairs - old_pairs) / (nn * nn);
    }

    /// Commits the swap last evaluated by swap_delta.
    void commit(Eigen::Index a, Eigen::Index b) {
        x_.row(a) = row_a_;
        x_.row(b) = row_b_;
        single_[a] = new_sa_;
        single_[b] = new_sb_;
        pair_.row(a) = new_pa_.transpose();
        pair_.col(a) = new_pa_;
        pair_.row(b) = new_pb_.transpose();
        pair_.col(b) = new_pb_;
    }

    const Eigen::MatrixXd& points() const { return x_; }

private:
    template <class Row>
    static double single_term(const Row& xi) {
        double prod = 1.0;
        for (Eigen::Index k = 0; k < xi.size(); ++k) {
            const double c = std::abs(xi[k] - 0.5);
            prod *= 1.0 + 0.5 * c - 0.5 * c * c;
        }
        return prod;
    }
    template <class RowA, class RowB>
    static double pair_term(const RowA& xi, const RowB& xj) {
        double prod = 1.0;
        for (Eigen::Index k = 0; k < xi.size(); ++k)
            prod *= 1.0 + 0.5 * std::abs(xi[k] - 0.5) + 0.5 * std::abs(xj[k] - 0.5) - 0.5 * std::abs(xi[k] - xj[k]);
        return prod;
    }

    Eigen::MatrixXd x_;
    Eigen::Index n_, d_;
    Eigen::VectorXd single_;
    Eigen::MatrixXd pair_;
    double base_ = 0.0;

    Eigen::RowVectorXd row_a_, row_b_;
    Eigen::VectorXd new_pa_, new_pb_;
    double new_sa_ = 0.0, new_sb_ = 0.0;
};

}  // namespace

Design generate_lhs(int n, int dim, std::uint64_t seed, int iterations) {
    if (n < 2) throw ConfigError("LHS needs n >= 2");
    if (dim < 1) throw ConfigError("LHS needs dim >= 1");
    if (iterations < 0) throw ConfigError("LHS iterations must be non-negative");

    Rng rng(seed);
    Eigen::MatrixXd x(n, dim);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int c = 0; c < dim; ++c) {
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        for (int i = 0; i < n; ++i) x(i, c) = (perm[static_cast<std::size_t>(i)] + 0.5) / n;
    }

    Design design;
    design.kind = DesignKind::LhsOptimized;
    design.seed = seed;
    design.initial_discrepancy = centered_l2_discrepancy(x);

    DiscrepancyTracker tracker(x);
    double current = design.initial_discrepancy;
    for (int it = 0; it < iterations; ++it) {
        const auto col = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dim)));
        const auto a = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        auto b = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n - 1)));
        if (b >= a) ++b;
        const double delta = tracker.swap_delta(a, b, col);
        if (delta < 0.0) {
            tracker.commit(a, b);
            current += delta;
            design.accepted_scores.push_back(current);
        }
    }

    design.points = tracker.points();
    design.discrepancy = centered_l2_discrepancy(design.points);
    return design;
}

Design generate_random(int n, int dim, std::uint64_t seed) {
    if (n < 1) throw ConfigError("random design needs n >= 1");
    if (dim < 1) throw ConfigError("random design needs dim >= 1");
    Rng rng(seed);
    Design design;
    design.kind = DesignKind::UniformRandom;
    design.seed = seed;
    design.points.resize(n, dim);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < dim; ++c) design.points(i, c) = rng.uniform();
    design.discrepancy = centered_l2_discrepancy(design.points);
    design.initial_discrepancy = design.discrepancy;
    return design;
}

}  // namespace calibkit
