// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "semsplat/rasterizer.hpp"
#include "semsplat/scene_model.hpp"
#include "scenes.hpp"
#include "semsplat/simd.hpp"

using namespace semsplat;
using namespace semsplat::testing;

TEST(Rasterizer, EmptySetRendersBackground) {
    SplatSet s;
    s.feature_dim = 2;
    RasterSettings r;
    r.background_color = Vec3(0.2, 0.4, 0.6);
    r.background_feature = {1.0, -1.0};
    const RenderOutput out = rasterize_forward(s, 5, 4, r);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        EXPECT_DOUBLE_EQ(out.color[3 * p + 1], 0.4);
        EXPECT_DOUBLE_EQ(out.feature[2 * p + 1], -1.0);
        EXPECT_DOUBLE_EQ(out.accum_alpha[p], 0.0);
    }
}

TEST(Rasterizer, SingleSplatCenterPixel) {
    SplatSet s;
    s.feature_dim = 1;
    Splat2D sp;
    sp.center = Vec2(3, 2);
    sp.cov2d = Vec3(4, 0, 4);
    sp.view_depth = 2.0;
    sp.rgb = Vec3(1, 0, 0);
    sp.alpha_base = 0.5;
    s.splats.push_back(sp);
    s.features = {1.0};
    const RenderOutput out = rasterize_forward(s, 8, 6, RasterSettings{});
    const std::size_t p = 2 * 8 + 3;
    EXPECT_NEAR(out.color[3 * p], 0.5, 1e-15);
    EXPECT_NEAR(out.depth[p], 1.0, 1e-15);
    EXPECT_NEAR(out.accum_alpha[p], 0.5, 1e-15);
}

TEST(Rasterizer, AlphaIsClampedAtMaximum) {
    SplatSet s;
    s.feature_dim = 1;
    Splat2D sp;
    sp.center = Vec2(1, 1);
    sp.cov2d = Vec3(1, 0, 1);
    sp.view_depth = 1.0;
    sp.alpha_base = 1.0;
    s.splats.push_back(sp);
    s.features = {0.0};
    RasterSettings r;
    const RenderOutput out = rasterize_forward(s, 3, 3, r);
    EXPECT_NEAR(out.accum_alpha[4], r.alpha_max, 1e-15);
}

TEST(Rasterizer, DepthOrderBreaksTiesBySourceIndex) {
    SplatSet s;
    s.feature_dim = 0;
    for (std::uint32_t i : {2u, 0u, 1u}) {
        Splat2D sp;
        sp.view_depth = 1.0;
        sp.source_index = i;
        s.splats.push_back(sp);
    }
    const auto order = depth_order(s);
    EXPECT_EQ(order, (std::vector<std::uint32_t>{1, 2, 0}));
}

TEST(Rasterizer, TiledForwardMatchesOracle) {
    std::mt19937_64 rng(11);
    for (int scene = 0; scene < 25; ++scene) {
        const SplatSet s = random_splats(rng, 1 + rng() % 200, 64, 64, 3);
        const RasterSettings r;
        const RenderOutput tiled = rasterize_forward(s, 64, 64, r);
        const RenderOutput oracle = rasterize_oracle(s, 64, 64, r);
        EXPECT_LT(max_diff(tiled.color, oracle.color), 1e-5);
        EXPECT_LT(max_diff(tiled.depth, oracle.depth), 1e-5);
        EXPECT_LT(max_diff(tiled.feature, oracle.feature), 1e-5);
    }
}

TEST(Rasterizer, ScalarAndAvx2RendersAgree) {
    if (!simd::backend_available(simd::Backend::Avx2)) GTEST_SKIP() << "AVX2 not available";
    std::mt19937_64 rng(12);
    const SplatSet s = random_splats(rng, 150, 48, 40, 2);
    const simd::Backend before = simd::active_backend();
    simd::set_backend(simd::Backend::Scalar);
    const RenderOutput a = rasterize_forward(s, 48, 40, RasterSettings{});
    simd::set_backend(simd::Backend::Avx2);
    const RenderOutput b = rasterize_forward(s, 48, 40, RasterSettings{});
    simd::set_backend(before);
    EXPECT_LT(max_diff(a.color, b.color), 1e-9);
    EXPECT_LT(max_diff(a.feature, b.feature), 1e-9);
}

TEST(Rasterizer, RenderIsDeterministic) {
    std::mt19937_64 rng(13);
    const SplatSet s = random_splats(rng, 120, 40, 40, 2);
    const RenderOutput a = rasterize_forward(s, 40, 40, RasterSettings{});
    const RenderOutput b = rasterize_forward(s, 40, 40, RasterSettings{});
    EXPECT_EQ(a.color, b.color);
    EXPECT_EQ(a.feature, b.feature);
}

TEST(Projection, CenterMatchesPinholeProjection) {
    const Camera cam = test_camera(32, 24);
    const Vec3 mean(0.1, -0.2, 2.0);
    const auto sp = project_gaussian(mean, Vec4(1, 0, 0, 0), Vec3::Constant(std::log(0.05)), cam, RasterSettings{});
    ASSERT_TRUE(sp.has_value());
    const Vec2 uv = cam.project(mean);
    EXPECT_NEAR(sp->center.x(), uv.x(), 1e-12);
    EXPECT_NEAR(sp->center.y(), uv.y(), 1e-12);
    EXPECT_NEAR(sp->view_depth, 2.0, 1e-12);
}

TEST(Projection, BehindCameraIsCulled) {
    const Camera cam = test_camera(32, 24);
    EXPECT_FALSE(project_gaussian(Vec3(0, 0, -1), Vec4(1, 0, 0, 0), Vec3::Zero(), cam, RasterSettings{}).has_value());
}

TEST(IdentityDeformation, RendersMatchStaticRenderExactly) {
    const GaussianCloud cloud = random_cloud(150, 5);
    SceneModel model = SceneModel::create(cloud, 8, 0);
    model.tracker = SemanticTracker::zeros(cloud.feature_dim);
    const Camera cam = test_camera(48, 40);
    const RasterSettings r;
    const RenderOutput ref = render_static(cloud, cam, r);
    std::mt19937_64 rng(6);
    for (int k = 0; k < 10; ++k) {
        const double t = std::uniform_real_distribution<double>(0, 1)(rng);
        const RenderOutput out = render_model(model, cam, t, r).output;
        EXPECT_EQ(out.color, ref.color) << "t=" << t;
        EXPECT_EQ(out.depth, ref.depth) << "t=" << t;
        EXPECT_EQ(out.feature, ref.feature) << "t=" << t;
    }
}
