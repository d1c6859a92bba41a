#include "calibkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calibkit/errors.hpp"

namespace calibkit {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && x[order[static_cast<std::size_t>(j + 1)]] == x[order[static_cast<std::size_t>(i)]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks[order[static_cast<std::size_t>(k)]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson_of_ranks(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry) {
    const Eigen::ArrayXd dx = rx.array() - rx.mean();
    const Eigen::ArrayXd dy = ry.array() - ry.mean();
    const double sxx = dx.square().sum(), syy = dy.square().sum();
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("Spearman correlation of a constant vector");
    const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace

double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw ShapeError("spearman: vectors differ in length");
    if (x.size() < 2) throw ShapeError("spearman: need at least 2 samples");
    return pearson_of_ranks(average_ranks(x), average_ranks(y));
}

SensitivityMatrix sensitivity_table(const Eigen::MatrixXd& design, const Eigen::MatrixXd& responses,
                                    std::vector<std::string> column_labels) {
    if (design.rows() != responses.rows())
        throw ShapeError("sensitivity_table: design has " + std::to_string(design.rows()) +
                         " rows, responses have " + std::to_string(responses.rows()));
    if (design.rows() < 2) throw ShapeError("sensitivity_table: need at least 2 samples");
    if (column_labels.empty())
        for (Eigen::Index j = 0; j < responses.cols(); ++j) column_labels.push_back(std::to_string(j + 1));
    if (static_cast<Eigen::Index>(column_labels.size()) != responses.cols())
        throw ShapeError("sensitivity_table: label count differs from response columns");

    SensitivityMatrix s;
    s.rho.setConstant(design.cols(), responses.cols(), std::numeric_limits<double>::quiet_NaN());
    s.defined.setConstant(design.cols(), responses.cols(), false);
    s.column_labels = std::move(column_labels);

    std::vector<Eigen::VectorXd> input_ranks;
    for (Eigen::Index i = 0; i < design.cols(); ++i) input_ranks.push_back(average_ranks(design.col(i)));
    for (Eigen::Index j = 0; j < responses.cols(); ++j) {
        const Eigen::VectorXd ry = average_ranks(responses.col(j));
        for (Eigen::Index i = 0; i < design.cols(); ++i) {
            try {
                s.rho(i, j) = pearson_of_ranks(input_ranks[static_cast<std::size_t>(i)], ry);
                s.defined(i, j) = true;
            } catch (const UndefinedCorrelation&) {
            }
        }
    }
    return s;
}

Eigen::VectorXd PcaModel::explained_ratio() const {
    const double total = variances.sum();
    if (total <= 0.0) return Eigen::VectorXd::Zero(variances.size());
    return variances / total;
}

PcaModel pca_fit(const Eigen::MatrixXd& responses) {
    if (responses.rows() < 2) throw ShapeError("pca_fit: need at least 2 samples");
    PcaModel model;
    model.mean_curve = responses.colwise().mean().transpose();
    const Eigen::MatrixXd centered = responses.rowwise() - model.mean_curve.transpose();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = (s.size() ? s[0] : 0.0) *
                          static_cast<double>(std::max(centered.rows(), centered.cols())) *
                          std::numeric_limits<double>::epsilon();
    Eigen::Index keep = 0;
    while (keep < s.size() && s[keep] > cutoff && s[keep] > 0.0) ++keep;

    if (keep == 0) model.warning = "all response rows are identical; PCA has no components";
    model.basis = svd.matrixV().leftCols(keep);
    model.variances = s.head(keep).array().square() / static_cast<double>(responses.rows() - 1);
    // Sign convention: each basis vector has a non-negative component sum.
    for (Eigen::Index c = 0; c < keep; ++c)
        if (model.basis.col(c).sum() < 0.0) model.basis.col(c) *= -1.0;
    return model;
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& curve, int n_components) {
    if (curve.size() != model.mean_curve.size())
        throw ShapeError("pca_project: curve has " + std::to_string(curve.size()) + " values, model expects " +
                         std::to_string(model.mean_curve.size()));
    const int n = n_components < 0 ? model.components() : n_components;
    if (n > model.components())
        throw ShapeError("pca_project: requested " + std::to_string(n) + " components, model has " +
                         std::to_string(model.components()));
    return model.basis.leftCols(n).transpose() * (curve - model.mean_curve);
}

Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& coefficients) {
    if (coefficients.size() > model.components()) throw ShapeError("pca_reconstruct: too many coefficients");
    return model.mean_curve + model.basis.leftCols(coefficients.size()) * coefficients;
}

}  // namespace calibkit
