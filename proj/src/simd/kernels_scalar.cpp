// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace semsplat::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void exp_scalar(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

void splat_row_scalar(const SplatRow& row, double* alpha, double* gauss, std::size_t n) {
    const double dy = row.y - row.center_y;
    for (std::size_t k = 0; k < n; ++k) {
        const int x = row.x0 + static_cast<int>(k);
        const double dx = static_cast<double>(x) - row.center_x;
        const double power = -0.5 * (row.conic_xx * dx * dx + row.conic_yy * dy * dy) -
                             row.conic_xy * dx * dy;
        const double g = std::exp(power);
        const double a = row.opacity * g;
        const bool inside = x >= row.rect_min_x && x <= row.rect_max_x;
        gauss[k] = g;
        alpha[k] = (inside && a >= row.alpha_min) ? std::min(a, row.alpha_max) : 0.0;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{dot_scalar, axpy_scalar, exp_scalar, splat_row_scalar};
    return table;
}

}  // namespace semsplat::simd::detail
