// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/frame.hpp"
#include "semsplat/rasterizer.hpp"

namespace semsplat {

struct LossWeights {
    double lambda = 0.01;
    int region_min_pixels = 1000;
    double depth_epsilon = 1e-3;
    bool region_smoothness = true;  // false drops L_RS (ablation)

    void validate() const;
};

/// Region threshold rescaled from the 854x480 reference resolution, floor 16.
int scaled_region_min_pixels(int width, int height);

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // d value / d prediction
};

/// Mean absolute error; subgradient sign(p - t) / count with sign(0) = 0.
LossValue l1_loss(std::span<const double> pred, std::span<const double> target);
inline LossValue photometric_l1(std::span<const double> pred, std::span<const double> target) {
    return l1_loss(pred, target);
}

/// Mean of |1/target - 1/max(pred, eps)| over pixels with target > 0.
LossValue inverse_depth_loss(std::span<const double> pred, std::span<const double> target, double epsilon);

/// Mean vertical plus mean horizontal absolute neighbour difference, summed over channels.
LossValue tv_loss(std::span<const double> map, int width, int height, int channels);

/// Mean absolute deviation from per-region means for labels (non-zero) with
/// more than `min_pixels` pixels; the means participate in the gradient.
LossValue region_smoothness_loss(std::span<const double> feature, std::span<const std::uint16_t> labels, int width,
                                 int height, int channels, int min_pixels);

/// Region ids from 4-connected groups of identical quantized feature vectors.
std::vector<std::uint16_t> derive_region_labels(std::span<const float> feature, int width, int height, int channels,
                                                double quantum = 0.05);

/// Supervision for one frame in double precision.
struct LossTargets {
    int width = 0;
    int height = 0;
    int feature_dim = 0;
    std::vector<double> color;    // H*W*3 in [0,1]
    std::vector<double> depth;    // H*W, 0 = invalid
    std::vector<double> feature;  // H*W*d
    std::vector<std::uint16_t> labels;

    static LossTargets from_frame(const FrameSample& frame);
};

struct LossBreakdown {
    double total = 0.0;
    double color = 0.0;
    double depth = 0.0;
    double feature = 0.0;
    double tv_color = 0.0;
    double tv_depth = 0.0;
    double tv_feature = 0.0;
    double region = 0.0;
};

/// Composite objective and its gradient on the rendered maps.
LossBreakdown total_loss(const RenderOutput& render, const LossTargets& targets, const LossWeights& weights,
                         RenderGradient* grad = nullptr);

}  // namespace semsplat
