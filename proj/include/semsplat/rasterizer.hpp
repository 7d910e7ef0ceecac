// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semsplat/gaussian_scene.hpp"

namespace semsplat {

/// A Gaussian after EWA projection to the image plane.
struct Splat2D {
    Vec2 center = Vec2::Zero();       // pixels
    Vec3 cov2d = Vec3::Zero();        // (xx, xy, yy) in px^2, includes the +0.3 low-pass
    double view_depth = 0.0;          // camera-frame z
    Vec3 rgb = Vec3::Zero();
    double alpha_base = 0.0;          // activated opacity
    std::uint32_t source_index = 0;   // index into the cloud
};

/// Splats plus their features, stored flat (features[i*feature_dim + k]).
struct SplatSet {
    int feature_dim = 0;
    std::vector<Splat2D> splats;
    std::vector<double> features;

    std::size_t size() const { return splats.size(); }
    std::span<const double> feature(std::size_t i) const {
        return {features.data() + i * feature_dim, static_cast<std::size_t>(feature_dim)};
    }
};

struct RasterSettings {
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.99;
    double extent_sigma = 3.0;  // footprint half-size in standard deviations
    double low_pass = 0.3;
    int tile_size = 16;
    Vec3 background_color = Vec3::Zero();
    std::vector<double> background_feature;  // empty means zero
};

struct RenderOutput {
    int width = 0;
    int height = 0;
    int feature_dim = 0;
    std::vector<double> color;        // H*W*3
    std::vector<double> depth;        // H*W
    std::vector<double> feature;      // H*W*d
    std::vector<double> accum_alpha;  // H*W

    static RenderOutput zeros(int width, int height, int feature_dim);
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Upstream gradients on the rendered maps.
struct RenderGradient {
    std::vector<double> color;    // H*W*3
    std::vector<double> depth;    // H*W
    std::vector<double> feature;  // H*W*d

    static RenderGradient zeros(int width, int height, int feature_dim);
};

struct SplatGradients {
    int feature_dim = 0;
    std::vector<Vec2> center;
    std::vector<Vec3> cov2d;
    std::vector<double> view_depth;
    std::vector<Vec3> rgb;
    std::vector<double> alpha_base;
    std::vector<double> features;

    static SplatGradients zeros(std::size_t count, int feature_dim);
};

/// Inclusive pixel rectangle covered by a splat.
struct Footprint {
    int min_x, max_x, min_y, max_y;
    bool empty() const { return min_x > max_x || min_y > max_y; }
};

Footprint splat_footprint(const Splat2D& splat, const RasterSettings& settings, int width, int height);

/// Fills center, cov2d and view_depth; std::nullopt when culled (depth outside
/// (near, far) or footprint off-screen).
std::optional<Splat2D> project_gaussian(const Vec3& mean, const Vec4& rotation, const Vec3& log_scale,
                                        const Camera& camera, const RasterSettings& settings);

struct ProjectionGradient {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
};

ProjectionGradient project_gaussian_backward(const Vec3& mean, const Vec4& rotation, const Vec3& log_scale,
                                             const Camera& camera, const Vec2& d_center, const Vec3& d_cov2d,
                                             double d_view_depth);

/// Forward state kept for the backward pass.
struct RasterTrace {
    struct Contribution {
        std::uint32_t slot;  // position in the tile's splat list
        double alpha;
        double gauss;
    };
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    int tile_size = 16;
    std::vector<std::uint32_t> tile_offsets;  // tiles+1
    std::vector<std::uint32_t> tile_splats;   // splat indices, front to back per tile
    std::vector<std::vector<Contribution>> pixels;
    std::vector<double> final_transmittance;
};

/// Tile-based front-to-back alpha blending of color, depth and features.
RenderOutput rasterize_forward(const SplatSet& splats, int width, int height, const RasterSettings& settings,
                               RasterTrace* trace = nullptr);

/// Gradients of sum(upstream .* outputs) w.r.t. every splat field.
SplatGradients rasterize_backward(const SplatSet& splats, const RasterSettings& settings, const RasterTrace& trace,
                                  const RenderGradient& upstream);

/// Exhaustive per-pixel reference with a global depth sort; same semantics as
/// rasterize_forward, scalar arithmetic only.
RenderOutput rasterize_oracle(const SplatSet& splats, int width, int height, const RasterSettings& settings);

/// Depth order with ties broken by source index.
std::vector<std::uint32_t> depth_order(const SplatSet& splats);

}  // namespace semsplat
