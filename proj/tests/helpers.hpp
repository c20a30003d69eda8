#pragma once

#include "oracles.hpp"
#include "rkgs/linalg.hpp"
#include "rkgs/sampling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>

namespace testing_helpers {

inline oracle::Mat to_oracle(const rkgs::DenseMatrix& X) {
    oracle::Mat M(X.rows(), oracle::Vec(X.cols()));
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j) M[i][j] = X(i, j);
    return M;
}

inline rkgs::DenseMatrix gaussian_matrix(rkgs::Prng& rng, std::size_t m, std::size_t n) {
    std::vector<double> d(m * n);
    for (auto& v : d) v = rkgs::gaussian(rng);
    return rkgs::DenseMatrix(m, n, std::move(d));
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline void expect_vec_near(std::span<const double> a, std::span<const double> b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], tol) << "index " << k;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = tag;
        if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
        path_ = std::filesystem::temp_directory_path() / ("rkgs_test_" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testing_helpers
