// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Data-parallel inner kernels. Every kernel has a scalar reference version
// and, on x86-64, an AVX2/FMA version. The active variant is chosen once at
// startup from CPUID and can be overridden with SEMSPLAT_SIMD=scalar|avx2 or
// set_backend(). Results of the vector variants agree with the scalar
// reference to within a few ulp; they are not bit-identical.

#include <cstddef>
#include <span>

namespace semsplat::simd {

enum class Backend { Scalar, Avx2 };

const char* backend_name(Backend backend);
bool backend_available(Backend backend);
Backend active_backend();
/// Throws Error(InvalidArgument) if the backend is not compiled in or the CPU lacks it.
void set_backend(Backend backend);

/// Inputs for evaluating one screen-space Gaussian along a pixel row.
struct SplatRow {
    double conic_xx = 0.0;  // inverse 2D covariance
    double conic_xy = 0.0;
    double conic_yy = 0.0;
    double center_x = 0.0;
    double center_y = 0.0;
    double opacity = 0.0;
    double y = 0.0;         // row coordinate (pixel centers are integers)
    int x0 = 0;             // first pixel of the span
    int rect_min_x = 0;     // inclusive horizontal footprint of the splat
    int rect_max_x = 0;
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.99;
};

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*exp)(const double* in, double* out, std::size_t n);
    /// For pixel k of the span (x = x0 + k): gauss[k] = exp(power), alpha[k] =
    /// min(opacity*gauss, alpha_max), or 0 when outside the footprint or below alpha_min.
    void (*splat_row)(const SplatRow& row, double* alpha, double* gauss, std::size_t n);
};

const KernelTable& kernels_for(Backend backend);
const KernelTable& kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    kernels().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace semsplat::simd
