// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "falqon/error.hpp"
#include "falqon/svd.hpp"
#include "falqon/tensor_ops.hpp"
#include "oracles/sym_eigen_oracle.hpp"
#include "test_util.hpp"

namespace falqon {
namespace {

using falqon::testing::random_matrix;

double sq_norm(const Matrix& m) {
    const double f = frobenius_norm(m);
    return f * f;
}

void expect_orthonormal_columns(const Matrix& u, double tol) {
    const Matrix g = matmul(u.transposed(), u);
    EXPECT_LE(max_abs(g - Matrix::identity(u.cols())), tol);
}

TEST(TruncatedSvd, ExactRankTwoRecovery) {
    const Matrix m = matmul(random_matrix(9, 2, 1), random_matrix(2, 7, 2));
    const TruncatedSvd svd = truncated_svd(m, 2);
    EXPECT_LE(frobenius_norm(m - reconstruct(svd)), 1e-10 * frobenius_norm(m));
}

TEST(TruncatedSvd, ZeroMatrix) {
    const TruncatedSvd svd = truncated_svd(Matrix(5, 4), 3);
    for (double s : svd.singular_values) EXPECT_EQ(s, 0.0);
    EXPECT_EQ(max_abs(reconstruct(svd)), 0.0);
    expect_orthonormal_columns(svd.u, 1e-12);
    expect_orthonormal_columns(svd.vt.transposed(), 1e-12);
}

TEST(TruncatedSvd, ResidualMatchesTrailingSpectrum) {
    const Matrix m = random_matrix(8, 6, 42);
    const auto sigma = oracle::singular_values_via_gram(m);
    const TruncatedSvd svd = truncated_svd(m, 2);
    double trailing = 0.0;
    for (std::size_t i = 2; i < sigma.size(); ++i) trailing += sigma[i] * sigma[i];
    EXPECT_NEAR(sq_norm(m - reconstruct(svd)), trailing, 1e-9 * trailing);
    EXPECT_NEAR(svd.singular_values[0], sigma[0], 1e-10 * sigma[0]);
    EXPECT_NEAR(svd.singular_values[1], sigma[1], 1e-10 * sigma[0]);
}

TEST(TruncatedSvd, InvariantsAcrossShapes) {
    struct Shape {
        std::size_t m, n, r;
    };
    for (const Shape s : {Shape{12, 5, 3}, Shape{5, 12, 4}, Shape{7, 7, 7}, Shape{30, 17, 6}, Shape{3, 40, 1}}) {
        const Matrix m = random_matrix(s.m, s.n, s.m * 100 + s.n);
        const TruncatedSvd svd = truncated_svd(m, s.r);
        ASSERT_EQ(svd.u.rows(), s.m);
        ASSERT_EQ(svd.u.cols(), s.r);
        ASSERT_EQ(svd.vt.rows(), s.r);
        ASSERT_EQ(svd.vt.cols(), s.n);
        expect_orthonormal_columns(svd.u, 1e-10);
        expect_orthonormal_columns(svd.vt.transposed(), 1e-10);
        for (std::size_t k = 0; k < s.r; ++k) {
            EXPECT_GE(svd.singular_values[k], 0.0);
            if (k > 0) EXPECT_LE(svd.singular_values[k], svd.singular_values[k - 1]);
            for (std::size_t i = 0; i < s.m; ++i) {
                if (std::fabs(svd.u(i, k)) > 1e-12) {
                    EXPECT_GT(svd.u(i, k), 0.0);
                    break;
                }
            }
        }
        const auto sigma = oracle::singular_values_via_gram(s.m >= s.n ? m : m.transposed());
        double trailing = 0.0;
        for (std::size_t i = s.r; i < sigma.size(); ++i) trailing += sigma[i] * sigma[i];
        EXPECT_NEAR(sq_norm(m - reconstruct(svd)), trailing, 1e-8 * std::max(trailing, 1e-300) + 1e-24);
        // U^T (M - U S V^T) V ~= 0.
        const Matrix proj = matmul(matmul(svd.u.transposed(), m - reconstruct(svd)), svd.vt.transposed());
        EXPECT_LE(max_abs(proj), 1e-8);
    }
}

TEST(TruncatedSvd, Deterministic) {
    const Matrix m = random_matrix(20, 11, 9);
    const TruncatedSvd a = truncated_svd(m, 5);
    const TruncatedSvd b = truncated_svd(m, 5);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.vt, b.vt);
    EXPECT_EQ(a.singular_values, b.singular_values);
}

TEST(TruncatedSvd, RankDeficientCompletesBasis) {
    // Rank 1 matrix, ask for rank 3.
    const Matrix m = matmul(random_matrix(6, 1, 3), random_matrix(1, 4, 4));
    const TruncatedSvd svd = truncated_svd(m, 3);
    expect_orthonormal_columns(svd.u, 1e-10);
    expect_orthonormal_columns(svd.vt.transposed(), 1e-10);
    EXPECT_LE(svd.singular_values[1], 1e-12 * svd.singular_values[0]);
    EXPECT_LE(frobenius_norm(m - reconstruct(svd)), 1e-12 * frobenius_norm(m));
}

TEST(TruncatedSvd, Errors) {
    EXPECT_THROW(truncated_svd(Matrix(3, 2), 0), DomainError);
    EXPECT_THROW(truncated_svd(Matrix(3, 2), 3), DomainError);
    Matrix bad(2, 2);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(truncated_svd(bad, 1), NumericalError);
}

TEST(TruncatedSvd, EckartYoungAgainstRandomFactorizations) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = random_matrix(10, 8, 1000 + trial);
        const std::size_t r = 1 + static_cast<std::size_t>(trial % 4);
        const TruncatedSvd svd = truncated_svd(m, r);
        const double best = frobenius_norm(m - reconstruct(svd));
        const double target_norm = frobenius_norm(reconstruct(svd));
        for (int s = 0; s < 100; ++s) {
            Matrix cand = matmul(random_matrix(10, r, rng()), random_matrix(r, 8, rng()));
            cand *= target_norm / frobenius_norm(cand);
            EXPECT_LE(best, frobenius_norm(m - cand));
        }
    }
}

TEST(FactorToLora, BalancedSplit) {
    const Matrix m = random_matrix(9, 6, 5);
    const TruncatedSvd svd = truncated_svd(m, 3);
    const LoraFactors f = factor_to_lora(svd);
    EXPECT_LE(max_abs(matmul(f.b, f.a) - reconstruct(svd)), 1e-12);
    for (std::size_t k = 0; k < 3; ++k) {
        double row = 0.0;
        double col = 0.0;
        for (std::size_t j = 0; j < f.a.cols(); ++j) row += f.a(k, j) * f.a(k, j);
        for (std::size_t i = 0; i < f.b.rows(); ++i) col += f.b(i, k) * f.b(i, k);
        EXPECT_NEAR(std::sqrt(row) * std::sqrt(col), svd.singular_values[k], 1e-10);
        EXPECT_NEAR(std::sqrt(row), std::sqrt(col), 1e-10);
    }
}

TEST(FactorToLora, ZeroSingularValuesGiveZeroFactors) {
    const Matrix m = matmul(random_matrix(5, 1, 8), random_matrix(1, 5, 9));
    TruncatedSvd svd = truncated_svd(m, 3);
    svd.singular_values[1] = 0.0;
    svd.singular_values[2] = 0.0;
    const LoraFactors f = factor_to_lora(svd);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(f.b(i, 1), 0.0);
        EXPECT_EQ(f.b(i, 2), 0.0);
        EXPECT_EQ(f.a(2, i), 0.0);
    }
}

}  // namespace
}  // namespace falqon
