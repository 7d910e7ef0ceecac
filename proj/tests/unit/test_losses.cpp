// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "semsplat/errors.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/rasterizer.hpp"

using namespace semsplat;

TEST(L1, MeanAbsoluteDifferenceAndSignGradient) {
    const std::vector<double> p = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> t = {1.5, 2.0, 2.0, 4.5};
    const LossValue v = l1_loss(p, t);
    EXPECT_DOUBLE_EQ(v.value, (0.5 + 0.0 + 1.0 + 0.5) / 4.0);
    EXPECT_DOUBLE_EQ(v.grad[0], -0.25);
    EXPECT_DOUBLE_EQ(v.grad[1], 0.0);
    EXPECT_DOUBLE_EQ(v.grad[2], 0.25);
}

TEST(L1, SizeMismatchThrows) {
    const std::vector<double> p = {1.0}, t = {1.0, 2.0};
    EXPECT_THROW(l1_loss(p, t), Error);
}

TEST(InverseDepth, IgnoresInvalidTargets) {
    const std::vector<double> p = {2.0, 4.0, 1.0};
    const std::vector<double> t = {1.0, 0.0, 1.0};
    const LossValue v = inverse_depth_loss(p, t, 1e-3);
    EXPECT_DOUBLE_EQ(v.value, (0.5 + 0.0) / 2.0);
    EXPECT_EQ(v.grad[1], 0.0);
    // r = 1/1 - 1/2 > 0, d/dp |r| = 1/p^2 / valid
    EXPECT_DOUBLE_EQ(v.grad[0], 0.25 / 2.0);
}

TEST(InverseDepth, ClampedPredictionHasNoGradient) {
    const std::vector<double> p = {0.0};
    const std::vector<double> t = {1.0};
    const LossValue v = inverse_depth_loss(p, t, 1e-3);
    EXPECT_DOUBLE_EQ(v.value, 1000.0 - 1.0);
    EXPECT_EQ(v.grad[0], 0.0);
}

TEST(TotalVariation, ClosedFormOnRamp) {
    // 3x2 map, one channel: horizontal steps of 1, vertical steps of 3.
    const std::vector<double> m = {0, 1, 2, 3, 4, 5};
    const LossValue v = tv_loss(m, 3, 2, 1);
    EXPECT_DOUBLE_EQ(v.value, 3.0 + 1.0);
}

TEST(TotalVariation, SumsChannels) {
    std::vector<double> m(2 * 2 * 2, 0.0);
    m[2 * 1 + 1] = 1.0;  // pixel (1,0), channel 1
    const LossValue v = tv_loss(m, 2, 2, 2);
    // one horizontal diff of 1 over 2 pairs; one vertical diff of 1 over 2 pairs
    EXPECT_DOUBLE_EQ(v.value, 0.5 + 0.5);
}

TEST(TotalVariation, ConstantMapIsZero) {
    const std::vector<double> m(4 * 4 * 3, 0.7);
    EXPECT_EQ(tv_loss(m, 4, 4, 3).value, 0.0);
}

TEST(RegionSmoothness, MeanAbsoluteDeviationFromRegionMean) {
    // 4 pixels, labels 1,1,2,0; min_pixels 1 so only region 1 (2 px) counts.
    const std::vector<double> f = {0.0, 1.0, 5.0, 9.0};
    const std::vector<std::uint16_t> l = {1, 1, 2, 0};
    const LossValue v = region_smoothness_loss(f, l, 2, 2, 1, 1);
    EXPECT_DOUBLE_EQ(v.value, 0.5);
    EXPECT_EQ(v.grad[2], 0.0);
    EXPECT_EQ(v.grad[3], 0.0);
}

TEST(RegionSmoothness, SmallRegionsAndLabelZeroExcluded) {
    const std::vector<double> f = {0.0, 1.0, 2.0, 3.0};
    const std::vector<std::uint16_t> l = {0, 0, 0, 3};
    EXPECT_EQ(region_smoothness_loss(f, l, 2, 2, 1, 1).value, 0.0);
}

TEST(RegionSmoothness, GradientKeepsMeanDependence) {
    const std::vector<double> f = {0.0, 1.0, 3.0};
    const std::vector<std::uint16_t> l = {1, 1, 1};
    const LossValue v = region_smoothness_loss(f, l, 3, 1, 1, 1);
    // mean 4/3; signs -,-,+ ; d/df_k = (s_k - mean(s)) / n
    const double ms = -1.0 / 3.0;
    EXPECT_NEAR(v.grad[0], (-1.0 - ms) / 3.0, 1e-15);
    EXPECT_NEAR(v.grad[2], (1.0 - ms) / 3.0, 1e-15);
}

TEST(RegionSmoothness, ScaledMinimumPixels) {
    EXPECT_EQ(scaled_region_min_pixels(854, 480), 1000);
    EXPECT_EQ(scaled_region_min_pixels(128, 128), 40);
    EXPECT_EQ(scaled_region_min_pixels(16, 16), 16);
}

TEST(RegionLabels, ConnectedComponentsOfQuantizedFeatures) {
    // Two constant halves split by a feature jump.
    const int w = 4, h = 2;
    std::vector<float> f(w * h, 0.0f);
    for (int y = 0; y < h; ++y) f[y * w + 2] = f[y * w + 3] = 1.0f;
    const auto labels = derive_region_labels(f, w, h, 1);
    EXPECT_EQ(labels[0], labels[5]);
    EXPECT_EQ(labels[2], labels[7]);
    EXPECT_NE(labels[0], labels[2]);
    EXPECT_NE(labels[0], 0);
}

TEST(TotalLoss, CombinesTermsWithLambda) {
    const int w = 3, h = 3, d = 1;
    RenderOutput r = RenderOutput::zeros(w, h, d);
    LossTargets t;
    t.width = w;
    t.height = h;
    t.feature_dim = d;
    t.color.assign(27, 0.5);
    t.depth.assign(9, 1.0);
    t.feature.assign(9, 0.0);
    t.labels.assign(9, 1);
    for (double& c : r.color) c = 0.25;
    for (double& z : r.depth) z = 1.0;
    r.feature[4] = 1.0;
    LossWeights wts;
    wts.lambda = 0.5;
    wts.region_min_pixels = 2;
    RenderGradient g;
    const LossBreakdown b = total_loss(r, t, wts, &g);
    EXPECT_DOUBLE_EQ(b.color, 0.25);
    EXPECT_DOUBLE_EQ(b.depth, 0.0);
    EXPECT_DOUBLE_EQ(b.feature, 1.0 / 9.0);
    EXPECT_NEAR(b.total, b.color + b.depth + b.feature + 0.5 * (b.tv_color + b.tv_depth + b.tv_feature + b.region), 1e-15);
    EXPECT_GT(b.region, 0.0);
    wts.region_smoothness = false;
    EXPECT_EQ(total_loss(r, t, wts).region, 0.0);
}

TEST(LossWeights, ValidateRejectsNegativeLambda) {
    LossWeights w;
    w.lambda = -1.0;
    EXPECT_THROW(w.validate(), Error);
}
