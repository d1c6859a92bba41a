#ifndef CALIBKIT_CSV_HPP
#define CALIBKIT_CSV_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace calibkit::csv {

/// Numeric table with a header row.
struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;  // rows x header.size()

    /// Column index by name; throws ParseError if absent.
    int column(const std::string& name) const;
};

/// Formats with 17 significant digits.
std::string format_double(double v);

/// Parses a comma-separated numeric table. Empty cells read as NaN. Errors
/// name the file line number.
Table read(const std::filesystem::path& path);
Table parse(const std::string& text, const std::string& source = "<memory>");

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const Eigen::MatrixXd& values);

/// `time_h,alpha`
void write_curve(const std::filesystem::path& path, const Eigen::VectorXd& times,
                 const Eigen::VectorXd& alpha);

/// `time_h,alpha_1,...,alpha_N`; bundle is N x N_time (one simulation per row).
void write_bundle(const std::filesystem::path& path, const Eigen::VectorXd& times,
                  const Eigen::MatrixXd& bundle);

/// Returns the N x N_time bundle and fills `times`.
Eigen::MatrixXd read_bundle(const std::filesystem::path& path, Eigen::VectorXd& times);

/// `p1,p2,p3,p4`
void write_design(const std::filesystem::path& path, const Eigen::MatrixXd& points);
Eigen::MatrixXd read_design(const std::filesystem::path& path);

}  // namespace calibkit::csv

#endif
