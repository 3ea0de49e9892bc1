// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "falqon/error.hpp"
#include "falqon/optimizer.hpp"
#include "test_util.hpp"

namespace falqon {
namespace {

// Scalar AdamW written out longhand with running products for the bias
// corrections instead of pow.
struct ScalarAdam {
    double lr, b1, b2, eps, wd;
    double m = 0.0, v = 0.0, b1t = 1.0, b2t = 1.0;

    double step(double g, double param) {
        b1t *= b1;
        b2t *= b2;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double mh = m / (1.0 - b1t);
        const double vh = v / (1.0 - b2t);
        return -lr * mh / (std::sqrt(vh) + eps) - lr * wd * param;
    }
};

TEST(AdamW, ThreeUnitGradientsMatchScalarOracle) {
    AdamWParams p;
    p.lr = 0.1;
    AdamW opt(p, {{1, 1}});
    ScalarAdam oracle{0.1, 0.9, 0.999, 1e-8, 0.0};
    for (int t = 0; t < 3; ++t) {
        opt.begin_step();
        const Matrix d = opt.step(0, Matrix::from_rows({{1.0}}));
        const double expected = oracle.step(1.0, 0.0);
        EXPECT_NEAR(d(0, 0), expected, 1e-12);
        // With a constant gradient both bias-corrected moments equal g exactly
        // in real arithmetic, so each delta is -lr / (1 + eps).
        EXPECT_NEAR(d(0, 0), -0.1 / (1.0 + 1e-8), 1e-12);
    }
    EXPECT_EQ(opt.step_count(), 3u);
}

TEST(AdamW, RandomSequencesMatchScalarOracleElementwise) {
    AdamWParams p;
    p.lr = 3e-3;
    p.beta1 = 0.8;
    p.beta2 = 0.99;
    p.eps = 1e-6;
    p.weight_decay = 0.1;
    AdamW opt(p, {{3, 4}});
    std::vector<ScalarAdam> oracles(12, ScalarAdam{p.lr, p.beta1, p.beta2, p.eps, p.weight_decay});
    Matrix param = testing::random_matrix(3, 4, 7);
    for (int t = 0; t < 25; ++t) {
        const Matrix g = testing::random_matrix(3, 4, 100 + t);
        opt.begin_step();
        const Matrix d = opt.step(0, g, &param);
        for (std::size_t i = 0; i < 12; ++i) {
            EXPECT_NEAR(d.values()[i], oracles[i].step(g.values()[i], param.values()[i]), 1e-15);
        }
        param += d;
    }
}

TEST(AdamW, ZeroGradientOnFreshStateGivesZeroDelta) {
    AdamW opt(AdamWParams{}, {{4, 2}});
    opt.begin_step();
    const Matrix d = opt.step(0, Matrix(4, 2));
    for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(AdamW, ConstantGradientDeltaApproachesMinusLrTimesSign) {
    AdamWParams p;
    p.lr = 0.01;
    AdamW opt(p, {{1, 2}});
    Matrix d;
    for (int t = 0; t < 500; ++t) {
        opt.begin_step();
        d = opt.step(0, Matrix::from_rows({{0.37, -5.0}}));
    }
    EXPECT_NEAR(d(0, 0), -0.01, 1e-9);
    EXPECT_NEAR(d(0, 1), 0.01, 1e-9);
}

TEST(AdamW, WeightDecayIsNoOpWithoutParameter) {
    AdamWParams p;
    p.weight_decay = 0.5;
    AdamW with(p, {{2, 2}});
    p.weight_decay = 0.0;
    AdamW without(p, {{2, 2}});
    const Matrix g = testing::random_matrix(2, 2, 3);
    with.begin_step();
    without.begin_step();
    EXPECT_EQ(with.step(0, g), without.step(0, g));
}

TEST(AdamW, SlotsKeepIndependentMoments) {
    AdamW opt(AdamWParams{}, {{2, 2}, {1, 3}});
    opt.begin_step();
    opt.step(0, testing::random_matrix(2, 2, 1));
    EXPECT_EQ(opt.moments(1).first, Matrix(1, 3));
    EXPECT_NE(opt.moments(0).first, Matrix(2, 2));
}

TEST(AdamW, Errors) {
    AdamW opt(AdamWParams{}, {{2, 2}});
    EXPECT_THROW(opt.step(0, Matrix(2, 2)), DomainError);  // no begin_step
    opt.begin_step();
    EXPECT_THROW(opt.step(0, Matrix(2, 3)), ShapeError);
    EXPECT_THROW(opt.step(1, Matrix(2, 2)), DomainError);
    EXPECT_THROW(opt.set_moments(0, {Matrix(1, 1), Matrix(1, 1)}), ShapeError);
    AdamWParams bad;
    bad.beta1 = 1.0;
    EXPECT_THROW(AdamW(bad, {}), DomainError);
    bad = AdamWParams{};
    bad.eps = 0.0;
    EXPECT_THROW(AdamW(bad, {}), DomainError);
}

}  // namespace
}  // namespace falqon
