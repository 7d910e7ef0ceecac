// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "semsplat/deformation.hpp"
#include "semsplat/errors.hpp"

using namespace semsplat;

namespace {

GaussianCloud random_cloud(std::size_t n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    GaussianCloud c = GaussianCloud::zeros(n, 1, d);
    for (double& v : c.means) v = u(rng);
    for (double& v : c.rotations) v = u(rng);
    c.normalize_rotations();
    for (double& v : c.log_scales) v = u(rng) - 2;
    for (double& v : c.features) v = u(rng);
    return c;
}

}  // namespace

TEST(Fdm, BasisIsGaussianOfNormalizedTime) {
    FdmParams p = FdmParams::identity(1, 1, 3);
    p.centers = {0.0, 0.5, 1.0};
    p.widths = {0.25, 0.5, 1.0};
    std::vector<double> b(3);
    fdm_basis(p, 0.5, b);
    EXPECT_NEAR(b[0], std::exp(-0.5 * 4.0), 1e-15);
    EXPECT_NEAR(b[1], 1.0, 1e-15);
    EXPECT_NEAR(b[2], std::exp(-0.5 * 0.25), 1e-15);
}

TEST(Fdm, IdentityEvaluatesToZero) {
    const FdmParams p = FdmParams::identity(4, 3, 8);
    for (double t : {0.0, 0.3, 1.0}) {
        for (double v : fdm_eval(p, t)) EXPECT_EQ(v, 0.0);
    }
}

TEST(Fdm, EvalIsWeightedBasisSum) {
    FdmParams p = FdmParams::identity(2, 2, 3);
    for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] = 0.1 * static_cast<double>(i) - 0.3;
    std::vector<double> b(3);
    fdm_basis(p, 0.7, b);
    const std::vector<double> out = fdm_eval(p, 0.7);
    for (std::size_t i = 0; i < 2; ++i) {
        for (int c = 0; c < 2; ++c) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += p.weight_row(i, c)[j] * b[j];
            EXPECT_NEAR(out[i * 2 + c], s, 1e-15);
        }
    }
}

TEST(Fdm, ClampWidthsEnforcesMinimum) {
    FdmParams p = FdmParams::identity(1, 1, 2);
    p.widths = {0.0, -1.0};
    p.clamp_widths();
    for (double w : p.widths) EXPECT_GE(w, FdmParams::kMinWidth);
}

TEST(Fdm, CheckShapesRejectsWrongCount) {
    const FdmParams p = FdmParams::identity(3, 3, 4);
    EXPECT_THROW(p.check_shapes(4), Error);
}

TEST(DeformGaussian, IdentityFieldReturnsCanonicalGeometry) {
    const GaussianCloud c = random_cloud(20, 3, 1);
    const DeformationField f = DeformationField::identity(20, 8);
    const DeformedGeometry g = deform_gaussian(c, f, 0.42);
    for (std::size_t i = 0; i < c.means.size(); ++i) EXPECT_EQ(g.means[i], c.means[i]);
    for (std::size_t i = 0; i < c.log_scales.size(); ++i) EXPECT_EQ(g.log_scales[i], c.log_scales[i]);
    for (std::size_t i = 0; i < c.rotations.size(); ++i) EXPECT_NEAR(g.rotations[i], c.rotations[i], 1e-15);
}

TEST(DeformGaussian, CancellingRotationOffsetIsDegenerate) {
    GaussianCloud c = random_cloud(1, 1, 2);
    DeformationField f = DeformationField::identity(1, 1);
    f.rotation.centers = {0.5};
    f.rotation.widths = {1.0};
    for (int k = 0; k < 4; ++k) f.rotation.weights[k] = -c.rotations[k];
    try {
        deform_gaussian(c, f, 0.5);
        FAIL() << "expected throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateRotation);
    }
}

TEST(Tracker, ZeroTrackerOutputsZero) {
    const SemanticTracker t = SemanticTracker::zeros(3);
    std::vector<double> in = {0.2, -0.4, 0.9, 0.5}, out(3, 1.0);
    tracker_forward(t, in, out);
    for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Tracker, InitializedIsSeedDeterministic) {
    const SemanticTracker a = SemanticTracker::initialized(3, 7);
    const SemanticTracker b = SemanticTracker::initialized(3, 7);
    const SemanticTracker c = SemanticTracker::initialized(3, 8);
    EXPECT_EQ(a.conv1_weights, b.conv1_weights);
    EXPECT_NE(a.conv1_weights, c.conv1_weights);
    EXPECT_NO_THROW(a.check_shapes());
    EXPECT_EQ(a.sequence_length(), 4);
}

TEST(DeformFeature, ZeroTrackerKeepsFeatures) {
    const GaussianCloud c = random_cloud(10, 3, 3);
    const SemanticTracker t = SemanticTracker::zeros(3);
    const FdmParams gate = FdmParams::identity(10, 1, 4);
    const DeformedFeatures f = deform_feature(c, t, gate, 0.8);
    EXPECT_EQ(f.features, c.features);
    for (double b : f.beta) EXPECT_DOUBLE_EQ(b, 0.5);
}

TEST(DeformFeature, GateSlopeScalesBeta) {
    const GaussianCloud c = random_cloud(1, 2, 4);
    SemanticTracker t = SemanticTracker::zeros(2);
    FdmParams gate = FdmParams::identity(1, 1, 1);
    gate.centers = {0.0};
    gate.widths = {1.0};
    gate.weights = {1.0};
    const DeformedFeatures f = deform_feature(c, t, gate, 0.0);
    EXPECT_NEAR(f.beta[0], 1.0 / (1.0 + std::exp(-t.slope)), 1e-15);
}

TEST(DeformFeature, DimensionMismatchThrows) {
    const GaussianCloud c = random_cloud(2, 3, 5);
    const SemanticTracker t = SemanticTracker::zeros(2);
    EXPECT_THROW(deform_feature(c, t, FdmParams::identity(2, 1, 2), 0.1), Error);
}
