#ifndef CALIBKIT_TEST_SUPPORT_HPP
#define CALIBKIT_TEST_SUPPORT_HPP

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "calibkit/trainer.hpp"

namespace test_support {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CALIBKIT_FIXTURES) / name; }

inline nlohmann::json oracles() {
    std::ifstream in(fixture("oracles.json"));
    return nlohmann::json::parse(in);
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
    Eigen::MatrixXd m(rows.size(), rows.at(0).size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("calibkit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(gen);
    return m;
}

/// Small, quick training settings for unit tests.
inline calibkit::TrainConfig quick_train(std::uint64_t seed = 1) {
    calibkit::TrainConfig c;
    c.v_folds = 3;
    c.max_iters = 150;
    c.ratio_window = 25;
    c.h_max = 3;
    c.max_exceed = 1;
    c.seed = seed;
    return c;
}

}  // namespace test_support

#endif
