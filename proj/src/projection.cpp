// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

// EWA projection of a 3D Gaussian: cov2d = J W Sigma W^T J^T + low_pass * I.

#include <cmath>

#include "semsplat/rasterizer.hpp"

namespace semsplat {
namespace {

Mat3 quat_to_matrix(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// d(sum G .* R(q)) / dq
Vec4 quat_matrix_backward(const Vec4& q, const Mat3& g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 d;
    d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                w * g(2, 1) - 2 * x * g(2, 2));
    d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                z * g(2, 1) - 2 * y * g(2, 2));
    d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
                x * g(2, 0) + y * g(2, 1));
    return d;
}

struct ProjectionTerms {
    Vec3 p;                        // camera-frame point
    Eigen::Matrix<double, 2, 3> j; // perspective Jacobian
    Mat3 cam_cov;                  // W Sigma W^T
    Mat3 rot;                      // R(q)
    Vec3 scale;                    // exp(log_scale)
};

ProjectionTerms projection_terms(const Vec3& mean, const Vec4& rotation, const Vec3& log_scale, const Camera& camera) {
    ProjectionTerms t;
    t.p = camera.to_camera(mean);
    const double z = t.p.z();
    t.j << camera.fx / z, 0.0, -camera.fx * t.p.x() / (z * z),
           0.0, camera.fy / z, -camera.fy * t.p.y() / (z * z);
    t.rot = quat_to_matrix(rotation);
    t.scale = log_scale.array().exp();
    const Mat3 a = t.rot * t.scale.asDiagonal();
    const Mat3 w = camera.rotation();
    t.cam_cov = w * (a * a.transpose()) * w.transpose();
    return t;
}

}  // namespace

Footprint splat_footprint(const Splat2D& splat, const RasterSettings& settings, int width, int height) {
    const double a = splat.cov2d[0], b = splat.cov2d[1], c = splat.cov2d[2];
    const double mid = 0.5 * (a + c);
    const double half = 0.5 * (a - c);
    const double lambda_max = mid + std::sqrt(half * half + b * b);
    const double r = settings.extent_sigma * std::sqrt(std::max(lambda_max, 0.0));
    auto clamp_lo = [](double v, int hi) { return static_cast<int>(std::max(0.0, std::min(std::ceil(v), double(hi)))); };
    auto clamp_hi = [](double v, int hi) { return static_cast<int>(std::max(-1.0, std::min(std::floor(v), double(hi)))); };
    Footprint f;
    f.min_x = clamp_lo(splat.center.x() - r, width);
    f.max_x = clamp_hi(splat.center.x() + r, width - 1);
    f.min_y = clamp_lo(splat.center.y() - r, height);
    f.max_y = clamp_hi(splat.center.y() + r, height - 1);
    return f;
}

std::optional<Splat2D> project_gaussian(const Vec3& mean, const Vec4& rotation, const Vec3& log_scale,
                                        const Camera& camera, const RasterSettings& settings) {
    const Vec3 p = camera.to_camera(mean);
    if (!(p.z() > camera.near && p.z() < camera.far)) return std::nullopt;
    const ProjectionTerms t = projection_terms(mean, rotation, log_scale, camera);
    const Eigen::Matrix2d cov = t.j * t.cam_cov * t.j.transpose();

    Splat2D s;
    s.center = camera.project(t.p);
    s.cov2d = Vec3(cov(0, 0) + settings.low_pass, cov(0, 1), cov(1, 1) + settings.low_pass);
    s.view_depth = t.p.z();
    if (!std::isfinite(s.center.x()) || !std::isfinite(s.center.y())) return std::nullopt;
    if (splat_footprint(s, settings, camera.width, camera.height).empty()) return std::nullopt;
    return s;
}

ProjectionGradient project_gaussian_backward(const Vec3& mean, const Vec4& rotation, const Vec3& log_scale,
                                             const Camera& camera, const Vec2& d_center, const Vec3& d_cov2d,
                                             double d_view_depth) {
    const ProjectionTerms t = projection_terms(mean, rotation, log_scale, camera);
    const double x = t.p.x(), y = t.p.y(), z = t.p.z();
    const double fx = camera.fx, fy = camera.fy;

    Eigen::Matrix2d g;
    g << d_cov2d[0], 0.5 * d_cov2d[1], 0.5 * d_cov2d[1], d_cov2d[2];
    const Mat3 d_cam_cov = t.j.transpose() * g * t.j;
    const Eigen::Matrix<double, 2, 3> d_j = 2.0 * g * t.j * t.cam_cov;

    Vec3 dp = Vec3::Zero();
    dp.x() += d_center.x() * fx / z;
    dp.y() += d_center.y() * fy / z;
    dp.z() += -d_center.x() * fx * x / (z * z) - d_center.y() * fy * y / (z * z);
    dp.z() += d_view_depth;
    dp.z() += d_j(0, 0) * (-fx / (z * z)) + d_j(1, 1) * (-fy / (z * z));
    dp.x() += d_j(0, 2) * (-fx / (z * z));
    dp.z() += d_j(0, 2) * (2.0 * fx * x / (z * z * z));
    dp.y() += d_j(1, 2) * (-fy / (z * z));
    dp.z() += d_j(1, 2) * (2.0 * fy * y / (z * z * z));

    const Mat3 w = camera.rotation();
    ProjectionGradient out;
    out.mean = w.transpose() * dp;

    const Mat3 d_sigma = w.transpose() * d_cam_cov * w;
    const Mat3 a = t.rot * t.scale.asDiagonal();
    const Mat3 d_a = 2.0 * d_sigma * a;
    Mat3 d_rot;
    for (int i = 0; i < 3; ++i) {
        for (int jj = 0; jj < 3; ++jj) d_rot(i, jj) = d_a(i, jj) * t.scale[jj];
    }
    for (int jj = 0; jj < 3; ++jj) {
        double ds = 0.0;
        for (int i = 0; i < 3; ++i) ds += d_a(i, jj) * t.rot(i, jj);
        out.log_scale[jj] = ds * t.scale[jj];
    }
    out.rotation = quat_matrix_backward(rotation, d_rot);
    return out;
}

}  // namespace semsplat
