#ifndef CALIBKIT_ANALYSIS_HPP
#define CALIBKIT_ANALYSIS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace calibkit {

/// Ranks starting at 1, ties receive the average of the ranks they span.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& x);

/// Spearman rank correlation: Pearson correlation of the average ranks.
/// Throws ShapeError on length mismatch or n < 2, UndefinedCorrelation when
/// either vector is constant.
double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct SensitivityMatrix {
    Eigen::MatrixXd rho;                         // inputs x responses; NaN where undefined
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
    std::vector<std::string> column_labels;
};

/// rho(i, j) = spearman(design column i, response column j). Constant
/// columns produce an undefined (NaN) entry instead of an error.
SensitivityMatrix sensitivity_table(const Eigen::MatrixXd& design, const Eigen::MatrixXd& responses,
                                    std::vector<std::string> column_labels = {});

struct PcaModel {
    Eigen::VectorXd mean_curve;  // length N_time
    Eigen::MatrixXd basis;       // N_time x n_components, orthonormal columns
    Eigen::VectorXd variances;   // non-increasing, sample variance (N - 1 normalization)
    std::string warning;         // set when the input has no variance

    int components() const { return static_cast<int>(basis.cols()); }
    /// Fraction of total variance carried by each component.
    Eigen::VectorXd explained_ratio() const;
};

/// PCA of the rows of `responses` (samples x N_time) via thin SVD of the
/// centered data. Components with numerically zero singular value are
/// dropped; identical rows give a model with no components.
PcaModel pca_fit(const Eigen::MatrixXd& responses);

/// basis^T (curve - mean), truncated to the first `n_components` when >= 0.
Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& curve, int n_components = -1);

/// mean + basis(:, :n) * coefficients
Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& coefficients);

}  // namespace calibkit

#endif
