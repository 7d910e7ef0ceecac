// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/gaussian_scene.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "semsplat/errors.hpp"

namespace semsplat {

Vec3 Camera::backproject(double u, double v, double z) const {
    const Vec3 cam((u - cx) / fx * z, (v - cy) / fy * z, z);
    return rotation().transpose() * (cam - translation());
}

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::InvalidArgument, "camera focal lengths must be positive");
    if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "camera image size must be positive");
    if (!(near > 0.0) || !(far > near)) fail(ErrorCode::InvalidArgument, "camera requires 0 < near < far");
    const Mat3 r = rotation();
    if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        fail(ErrorCode::InvalidArgument, "camera rotation block is not orthonormal");
    }
    const Eigen::RowVector4d last = world_to_camera.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12) {
        fail(ErrorCode::InvalidArgument, "world_to_camera must be a rigid transform");
    }
}

Camera Camera::resized(int new_width, int new_height) const {
    Camera out = *this;
    const double sx = static_cast<double>(new_width) / width;
    const double sy = static_cast<double>(new_height) / height;
    out.fx = fx * sx;
    out.fy = fy * sy;
    out.cx = (cx + 0.5) * sx - 0.5;
    out.cy = (cy + 0.5) * sy - 0.5;
    out.width = new_width;
    out.height = new_height;
    return out;
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_degrees,
                       int width, int height, double near, double far) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right_raw = forward.cross(up);
    if (right_raw.norm() < 1e-9) fail(ErrorCode::InvalidArgument, "look-at up vector is parallel to the view direction");
    const Vec3 right = right_raw.normalized();
    const Vec3 down = forward.cross(right);
    if (!(fov_y_degrees > 0.0 && fov_y_degrees < 180.0)) fail(ErrorCode::InvalidArgument, "fov must be in (0,180)");

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * fov_y_degrees * M_PI / 180.0);
    cam.fx = cam.fy;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.near = near;
    cam.far = far;
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    return cam;
}

GaussianCloud GaussianCloud::zeros(std::size_t count, int sh_degree, int feature_dim) {
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        fail(ErrorCode::InvalidArgument, "SH degree must be in [0,3], got " + std::to_string(sh_degree));
    }
    if (feature_dim < 1) fail(ErrorCode::InvalidArgument, "feature dimension must be positive");
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.feature_dim = feature_dim;
    cloud.means.assign(count * 3, 0.0);
    cloud.rotations.assign(count * 4, 0.0);
    for (std::size_t i = 0; i < count; ++i) cloud.rotations[4 * i] = 1.0;
    cloud.log_scales.assign(count * 3, 0.0);
    cloud.opacity_logits.assign(count, 0.0);
    cloud.sh_coeffs.assign(count * 3 * static_cast<std::size_t>(sh_coeff_count(sh_degree)), 0.0);
    cloud.features.assign(count * static_cast<std::size_t>(feature_dim), 0.0);
    return cloud;
}

void GaussianCloud::check_shapes() const {
    const std::size_t n = size();
    auto expect = [&](const std::vector<double>& v, std::size_t per, const char* name) {
        if (v.size() != n * per) {
            fail(ErrorCode::ShapeMismatch, std::string("cloud field '") + name + "' has " + std::to_string(v.size()) +
                                               " values, expected " + std::to_string(n * per));
        }
    };
    if (sh_degree < 0 || sh_degree > kMaxShDegree) fail(ErrorCode::ShapeMismatch, "cloud SH degree out of range");
    if (feature_dim < 1) fail(ErrorCode::ShapeMismatch, "cloud feature dimension must be positive");
    expect(means, 3, "means");
    expect(rotations, 4, "rotations");
    expect(log_scales, 3, "log_scales");
    expect(sh_coeffs, 3 * static_cast<std::size_t>(sh_count()), "sh_coeffs");
    expect(features, static_cast<std::size_t>(feature_dim), "features");
}

void GaussianCloud::normalize_rotations() {
    for (std::size_t i = 0; i < size(); ++i) {
        double* q = rotations.data() + 4 * i;
        const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (norm > 1e-12) {
            for (int k = 0; k < 4; ++k) q[k] /= norm;
        } else {
            q[0] = 1.0;
            q[1] = q[2] = q[3] = 0.0;
        }
    }
}

CloudDiagnostics validate_cloud(const GaussianCloud& cloud) {
    CloudDiagnostics report;
    const std::size_t n = cloud.size();
    auto all_finite = [](const double* p, std::size_t count) {
        for (std::size_t k = 0; k < count; ++k) {
            if (!std::isfinite(p[k])) return false;
        }
        return true;
    };
    const std::size_t k_sh = 3 * static_cast<std::size_t>(cloud.sh_count());
    const std::size_t d = static_cast<std::size_t>(cloud.feature_dim);
    for (std::size_t i = 0; i < n; ++i) {
        if (3 * i + 3 <= cloud.means.size() && !all_finite(&cloud.means[3 * i], 3)) ++report.non_finite_means;
        if (3 * i + 3 <= cloud.log_scales.size() && !all_finite(&cloud.log_scales[3 * i], 3)) ++report.non_finite_scales;
        if ((i + 1) * k_sh <= cloud.sh_coeffs.size() && !all_finite(&cloud.sh_coeffs[i * k_sh], k_sh)) ++report.non_finite_sh;
        if ((i + 1) * d <= cloud.features.size() && !all_finite(&cloud.features[i * d], d)) ++report.non_finite_features;
        if (4 * i + 4 <= cloud.rotations.size()) {
            const double* q = &cloud.rotations[4 * i];
            if (!all_finite(q, 4)) {
                ++report.non_finite_rotations;
            } else {
                const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
                if (std::abs(norm - 1.0) > 1e-6) ++report.denormalized_quaternions;
            }
        }
        const double o = sigmoid(cloud.opacity_logits[i]);
        if (!std::isfinite(cloud.opacity_logits[i]) || !(o > 0.0 && o < 1.0)) ++report.out_of_range_opacities;
    }
    return report;
}

GaussianCloud init_from_depth(const FrameSample& frame, const Camera& camera, const InitOptions& options) {
    if (options.stride < 1) fail(ErrorCode::InvalidArgument, "init stride must be >= 1");
    if (frame.width != camera.width || frame.height != camera.height) {
        fail(ErrorCode::ShapeMismatch, "frame '" + frame.name + "' size does not match the camera");
    }
    if (frame.depth.size() != frame.pixel_count() || frame.color.size() != 3 * frame.pixel_count()) {
        fail(ErrorCode::ShapeMismatch, "frame '" + frame.name + "' has inconsistent map sizes");
    }
    const int d = frame.feature_dim;
    if (d < 1 || frame.features.size() != frame.pixel_count() * static_cast<std::size_t>(d)) {
        fail(ErrorCode::ShapeMismatch, "frame '" + frame.name + "' lacks a compressed feature map");
    }

    struct Sample {
        int x, y;
        double z;
    };
    std::vector<Sample> samples;
    for (int y = 0; y < frame.height; y += options.stride) {
        for (int x = 0; x < frame.width; x += options.stride) {
            const double z = frame.depth[static_cast<std::size_t>(y) * frame.width + x];
            if (std::isfinite(z) && z > 0.0) samples.push_back({x, y, z});
        }
    }
    if (samples.empty()) fail(ErrorCode::EmptyCloud, "no valid depth at sampled pixels of frame '" + frame.name + "'");

    GaussianCloud cloud = GaussianCloud::zeros(samples.size(), options.sh_degree, d);
    const double c0 = 0.28209479177387814;
    const int k = cloud.sh_count();
    const double opacity_logit = logit(options.initial_opacity);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const Vec3 p = camera.backproject(s.x, s.y, s.z);
        for (int a = 0; a < 3; ++a) cloud.means[3 * i + a] = p[a];
        const double scale = std::log(s.z * options.stride / camera.fx);
        for (int a = 0; a < 3; ++a) cloud.log_scales[3 * i + a] = scale;
        cloud.opacity_logits[i] = opacity_logit;
        const std::size_t pix = static_cast<std::size_t>(s.y) * frame.width + s.x;
        for (int c = 0; c < 3; ++c) {
            const double rgb = frame.color[3 * pix + c] / 255.0;
            cloud.sh_coeffs[(3 * i + c) * k] = (rgb - 0.5) / c0;
        }
        for (int j = 0; j < d; ++j) cloud.features[i * d + j] = frame.features[pix * d + j];
    }
    return cloud;
}

}  // namespace semsplat
