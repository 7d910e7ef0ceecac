// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

// Real SH basis in the ordering and sign convention used by 3DGS renderers.

#include <algorithm>
#include <array>
#include <string>

#include "semsplat/errors.hpp"
#include "semsplat/gaussian_scene.hpp"

namespace semsplat {
namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                       -1.0925484305920792, 0.5462742152960396};
constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                       0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                                       -0.5900435899266435};

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        fail(ErrorCode::InvalidArgument, "SH degree must be in [0,3], got " + std::to_string(degree));
    }
}

}  // namespace

void sh_basis(int degree, const Vec3& dir, std::span<double> basis, std::span<double> grad) {
    check_degree(degree);
    const double x = dir.x(), y = dir.y(), z = dir.z();
    const bool want_grad = !grad.empty();
    auto set = [&](int k, double v, double gx, double gy, double gz) {
        basis[k] = v;
        if (want_grad) {
            grad[3 * k] = gx;
            grad[3 * k + 1] = gy;
            grad[3 * k + 2] = gz;
        }
    };
    set(0, kC0, 0, 0, 0);
    if (degree < 1) return;
    set(1, -kC1 * y, 0, -kC1, 0);
    set(2, kC1 * z, 0, 0, kC1);
    set(3, -kC1 * x, -kC1, 0, 0);
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    set(4, kC2[0] * x * y, kC2[0] * y, kC2[0] * x, 0);
    set(5, kC2[1] * y * z, 0, kC2[1] * z, kC2[1] * y);
    set(6, kC2[2] * (2 * zz - xx - yy), -2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z);
    set(7, kC2[3] * x * z, kC2[3] * z, 0, kC2[3] * x);
    set(8, kC2[4] * (xx - yy), 2 * kC2[4] * x, -2 * kC2[4] * y, 0);
    if (degree < 3) return;
    set(9, kC3[0] * y * (3 * xx - yy), kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0);
    set(10, kC3[1] * x * y * z, kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y);
    set(11, kC3[2] * y * (4 * zz - xx - yy), kC3[2] * -2 * x * y, kC3[2] * (4 * zz - xx - 3 * yy), kC3[2] * 8 * y * z);
    set(12, kC3[3] * z * (2 * zz - 3 * xx - 3 * yy), kC3[3] * -6 * x * z, kC3[3] * -6 * y * z,
        kC3[3] * (6 * zz - 3 * xx - 3 * yy));
    set(13, kC3[4] * x * (4 * zz - xx - yy), kC3[4] * (4 * zz - 3 * xx - yy), kC3[4] * -2 * x * y, kC3[4] * 8 * x * z);
    set(14, kC3[5] * z * (xx - yy), kC3[5] * 2 * x * z, kC3[5] * -2 * y * z, kC3[5] * (xx - yy));
    set(15, kC3[6] * x * (xx - 3 * yy), kC3[6] * (3 * xx - 3 * yy), kC3[6] * -6 * x * y, 0);
}

Vec3 evaluate_sh_linear(std::span<const double> coeffs, int degree, const Vec3& dir) {
    check_degree(degree);
    const int k = sh_coeff_count(degree);
    if (coeffs.size() != static_cast<std::size_t>(3 * k)) {
        fail(ErrorCode::InvalidArgument, "SH coefficient count does not match degree");
    }
    std::array<double, 16> basis{};
    sh_basis(degree, dir, std::span<double>(basis.data(), static_cast<std::size_t>(k)));
    Vec3 out = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < k; ++j) out[c] += coeffs[static_cast<std::size_t>(c * k + j)] * basis[j];
    }
    return out;
}

Vec3 evaluate_sh(std::span<const double> coeffs, int degree, const Vec3& dir) {
    Vec3 rgb = evaluate_sh_linear(coeffs, degree, dir);
    for (int c = 0; c < 3; ++c) rgb[c] = std::clamp(rgb[c] + 0.5, 0.0, 1.0);
    return rgb;
}

}  // namespace semsplat
