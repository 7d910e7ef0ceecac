// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semsplat/gaussian_scene.hpp"
#include "semsplat/query.hpp"

namespace semsplat {

struct SyntheticSpec {
    int classes = 3;
    int objects = 0;  // 0 means one object per class
    int frames = 60;
    int width = 128;
    int height = 128;
    std::uint64_t seed = 0;
    int full_dim = 16;
    int feature_dim = 3;  // compressed d recorded in the manifest
    double fps = 30.0;
    double object_noise = 0.02;  // per-object embedding offset, std per dimension
    double pixel_noise = 0.01;   // per-pixel embedding noise, std per dimension

    void validate() const;
    int object_count() const { return objects > 0 ? objects : classes; }
};

/// Ellipsoidal object at one instant (axis-aligned, world frame).
struct ObjectState {
    Vec3 center;
    Vec3 radii;
    Vec3 albedo;
    int label = 0;  // class index + 1
};

struct SyntheticFrame {
    std::vector<std::uint8_t> color;       // H*W*3
    std::vector<float> depth;              // H*W
    std::vector<std::uint16_t> labels;     // H*W
    std::vector<float> features_full;      // H*W*D_f, unit rows
};

/// Analytic deforming scene: soft ellipsoid blobs on sinusoidal paths in front
/// of a textured plane. Label k+1 is class k, label classes+1 the background.
class SyntheticScene {
public:
    explicit SyntheticScene(const SyntheticSpec& spec);

    const SyntheticSpec& spec() const { return spec_; }
    const Camera& camera() const { return camera_; }
    static std::string class_name(int k);

    double frame_time(int frame) const;  // normalized to [0,1]
    std::vector<ObjectState> objects_at(double t) const;
    /// Front-most label along the ray through pixel (u, v).
    int label_at(double u, double v, double t) const;
    /// Unit embedding axis of a label (1-based; classes+1 is the background).
    const std::vector<double>& axis(int label) const { return axes_.at(static_cast<std::size_t>(label - 1)); }

    SyntheticFrame render(int frame) const;
    QueryLexicon lexicon() const;

private:
    struct Hit {
        double depth;
        int object;  // -1 for the background plane
        Vec3 normal;
    };
    Hit trace(double u, double v, const std::vector<ObjectState>& objects) const;
    Vec3 shade(const Hit& hit, double u, double v, const std::vector<ObjectState>& objects) const;

    SyntheticSpec spec_;
    Camera camera_;
    std::vector<std::vector<double>> axes_;
    std::vector<std::vector<double>> object_offsets_;
    struct Motion {
        Vec3 base;
        Vec3 amplitude;
        Vec3 phase;
        Vec3 radii;
        double pulse_phase;
        Vec3 albedo;
        int label;
    };
    std::vector<Motion> motion_;
};

/// Writes manifest.json, lexicon.json and per-frame tensors under `dir`.
void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace semsplat
