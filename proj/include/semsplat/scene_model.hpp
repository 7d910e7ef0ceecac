// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semsplat/deformation.hpp"
#include "semsplat/gaussian_scene.hpp"
#include "semsplat/rasterizer.hpp"

namespace semsplat {

/// Everything the trainer optimizes: canonical cloud, deformation banks and
/// the shared feature tracker. Also used as the gradient container.
struct SceneModel {
    GaussianCloud cloud;
    DeformationField deformation;
    SemanticTracker tracker;
    bool tracker_enabled = true;

    static SceneModel create(GaussianCloud cloud, int basis_count, std::uint64_t tracker_seed);
    SceneModel zeros_like() const;
    void check_shapes() const;
    /// Post-step projection: widths >= min, unit quaternions.
    void project_constraints();
};

enum class ParamGroup { Means, Rotations, Scales, Opacity, Color, Features, Deformation, Tracker };
constexpr int kParamGroupCount = 8;
const char* param_group_name(ParamGroup group);

/// A named, shaped view of one trainable array.
struct ParameterView {
    std::string name;
    ParamGroup group;
    std::vector<std::uint64_t> shape;
    std::span<double> values;
};

/// Every trainable array of the model in a fixed order.
std::vector<ParameterView> model_parameters(SceneModel& model);

/// Intermediate state of one forward render, consumed by backward_model.
struct ModelForward {
    double t = 0.0;
    DeformedGeometry geometry;
    DeformedFeatures features;
    SplatSet splats;
    std::vector<Vec3> view_dirs;        // per visible splat, unit
    std::vector<double> view_dist;      // |mean' - camera center|
    std::vector<std::uint8_t> rgb_open; // per visible splat, 3 bits: channel unclamped
    RasterTrace trace;
    RenderOutput output;
};

ModelForward render_model(const SceneModel& model, const Camera& camera, double t, const RasterSettings& settings);

/// Static render of the canonical cloud with no deformation applied.
RenderOutput render_static(const GaussianCloud& cloud, const Camera& camera, const RasterSettings& settings);

/// Accumulates d(sum(upstream .* outputs)) into `grad` (shaped like `model`).
void backward_model(const SceneModel& model, const Camera& camera, const RasterSettings& settings,
                    const ModelForward& forward, const RenderGradient& upstream, SceneModel& grad);

}  // namespace semsplat
