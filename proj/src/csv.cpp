#include "calibkit/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "calibkit/errors.hpp"

namespace calibkit::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw ParseError("missing column '" + name + "'");
}

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Table parse(const std::string& text, const std::string& source) {
    Table t;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            for (auto& c : cells) t.header.push_back(trim(c));
            continue;
        }
        if (cells.size() != t.header.size()) {
            std::ostringstream os;
            os << source << ": line " << line_no << ": expected " << t.header.size()
               << " fields, found " << cells.size();
            throw ParseError(os.str());
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto& raw : cells) {
            const std::string c = trim(raw);
            if (c.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(c.c_str(), &end);
            if (end != c.c_str() + c.size() || errno == ERANGE) {
                std::ostringstream os;
                os << source << ": line " << line_no << ": '" << c << "' is not a number";
                throw ParseError(os.str());
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ParseError(source + ": missing header");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return t;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols())
        throw ShapeError("csv header/column count mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << format_double(values(r, c));
        out << '\n';
    }
}

void write_curve(const std::filesystem::path& path, const Eigen::VectorXd& times,
                 const Eigen::VectorXd& alpha) {
    if (times.size() != alpha.size()) throw ShapeError("curve length differs from grid");
    Eigen::MatrixXd m(times.size(), 2);
    m << times, alpha;
    write(path, {"time_h", "alpha"}, m);
}

void write_bundle(const std::filesystem::path& path, const Eigen::VectorXd& times,
                  const Eigen::MatrixXd& bundle) {
    if (bundle.cols() != times.size()) throw ShapeError("bundle width differs from grid");
    std::vector<std::string> header{"time_h"};
    for (Eigen::Index i = 0; i < bundle.rows(); ++i) header.push_back("alpha_" + std::to_string(i + 1));
    Eigen::MatrixXd m(times.size(), bundle.rows() + 1);
    m.col(0) = times;
    m.rightCols(bundle.rows()) = bundle.transpose();
    write(path, header, m);
}

Eigen::MatrixXd read_bundle(const std::filesystem::path& path, Eigen::VectorXd& times) {
    Table t = read(path);
    const int tc = t.column("time_h");
    if (tc != 0) throw ParseError(path.string() + ": time_h must be the first column");
    times = t.values.col(0);
    return t.values.rightCols(t.values.cols() - 1).transpose();
}

void write_design(const std::filesystem::path& path, const Eigen::MatrixXd& points) {
    std::vector<std::string> header;
    for (Eigen::Index c = 0; c < points.cols(); ++c) header.push_back("p" + std::to_string(c + 1));
    write(path, header, points);
}

Eigen::MatrixXd read_design(const std::filesystem::path& path) {
    Table t = read(path);
    Eigen::MatrixXd out(t.values.rows(), 4);
    for (int j = 0; j < 4; ++j) out.col(j) = t.values.col(t.column("p" + std::to_string(j + 1)));
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        if (!out.row(r).allFinite())
            throw ParseError(path.string() + ": line " + std::to_string(r + 2) + " (row " +
                             std::to_string(r + 1) + ") has a missing value");
    return out;
}

}  // namespace calibkit::csv
