// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "semsplat/frame.hpp"

namespace semsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

constexpr int kMaxShDegree = 3;
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Pinhole camera. Pixel centers sit at integer coordinates.
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    Mat4 world_to_camera = Mat4::Identity();
    double near = 0.01;
    double far = 100.0;

    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    Vec3 center() const { return -rotation().transpose() * translation(); }
    Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }
    Vec2 project(const Vec3& cam) const { return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy}; }
    /// World-space point seen at pixel (u, v) with camera-frame depth z.
    Vec3 backproject(double u, double v, double z) const;

    /// Throws Error(InvalidArgument) on a non-orthonormal rotation or bad clip planes.
    void validate() const;

    /// Same view at a different resolution; intrinsics scale with the image.
    Camera resized(int new_width, int new_height) const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_degrees,
                          int width, int height, double near = 0.01, double far = 100.0);
};

/// Canonical (time-zero) Gaussian scene. Flat row-major storage:
///   means N*3, rotations N*4 (w,x,y,z), log_scales N*3, opacity_logits N,
///   sh_coeffs N*3*K with K=(L+1)^2 (channel-major per point), features N*d.
struct GaussianCloud {
    int sh_degree = 1;
    int feature_dim = 3;
    std::vector<double> means;
    std::vector<double> rotations;
    std::vector<double> log_scales;
    std::vector<double> opacity_logits;
    std::vector<double> sh_coeffs;
    std::vector<double> features;

    static GaussianCloud zeros(std::size_t count, int sh_degree, int feature_dim);

    std::size_t size() const { return opacity_logits.size(); }
    int sh_count() const { return sh_coeff_count(sh_degree); }

    Vec3 mean(std::size_t i) const { return {means[3 * i], means[3 * i + 1], means[3 * i + 2]}; }
    Vec4 rotation(std::size_t i) const {
        return {rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]};
    }
    Vec3 log_scale(std::size_t i) const { return {log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]}; }
    std::span<const double> sh(std::size_t i) const {
        const std::size_t k = static_cast<std::size_t>(3 * sh_count());
        return {sh_coeffs.data() + i * k, k};
    }
    std::span<const double> feature(std::size_t i) const {
        return {features.data() + i * static_cast<std::size_t>(feature_dim), static_cast<std::size_t>(feature_dim)};
    }

    /// Throws Error(ShapeMismatch) unless every array agrees on N, d and L.
    void check_shapes() const;
    void normalize_rotations();
};

struct CloudDiagnostics {
    std::size_t non_finite_means = 0;
    std::size_t non_finite_rotations = 0;
    std::size_t non_finite_scales = 0;
    std::size_t non_finite_sh = 0;
    std::size_t non_finite_features = 0;
    std::size_t out_of_range_opacities = 0;
    std::size_t denormalized_quaternions = 0;

    std::size_t total() const {
        return non_finite_means + non_finite_rotations + non_finite_scales + non_finite_sh +
               non_finite_features + out_of_range_opacities + denormalized_quaternions;
    }
};

CloudDiagnostics validate_cloud(const GaussianCloud& cloud);

/// Real spherical-harmonic basis up to `degree` at unit direction `dir`.
/// `basis` receives K values; `grad` (optional) receives K*3 partials d/d(dir).
void sh_basis(int degree, const Vec3& dir, std::span<double> basis, std::span<double> grad = {});

/// Color before the +0.5 shift and clamp (linear in the coefficients).
Vec3 evaluate_sh_linear(std::span<const double> coeffs, int degree, const Vec3& dir);
/// 3DGS color convention: SH sum + 0.5, clamped to [0,1].
Vec3 evaluate_sh(std::span<const double> coeffs, int degree, const Vec3& dir);

struct InitOptions {
    int stride = 2;
    int sh_degree = 1;
    double initial_opacity = 0.1;
};

/// One Gaussian per stride-sampled pixel with valid depth.
/// Throws Error(EmptyCloud) if no sampled pixel has valid depth.
GaussianCloud init_from_depth(const FrameSample& frame, const Camera& camera, const InitOptions& options);

}  // namespace semsplat
