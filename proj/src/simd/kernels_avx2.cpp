// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace semsplat::simd::detail {
namespace {

// exp(x) via Cody-Waite reduction x = n*ln2 + r, |r| <= ln2/2, and a
// degree-13 Taylor polynomial for e^r (truncation error ~5e-18 relative).
inline __m256d exp_pd(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
    x = _mm256_min_pd(x, _mm256_set1_pd(709.0));

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    static constexpr double kInvFact[] = {
        1.0 / 6227020800.0,  // 1/13!
        1.0 / 479001600.0,   // 1/12!
        1.0 / 39916800.0,
        1.0 / 3628800.0,
        1.0 / 362880.0,
        1.0 / 40320.0,
        1.0 / 5040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    };
    __m256d p = _mm256_set1_pd(kInvFact[0]);
    for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));

    const __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i bits = _mm256_cvtepi32_epi64(n32);
    bits = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023));
    bits = _mm256_slli_epi64(bits, 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    const __m256d acc = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void exp_avx2(const double* in, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(in + i)));
    for (; i < n; ++i) out[i] = std::exp(in[i]);
}

void splat_row_avx2(const SplatRow& row, double* alpha, double* gauss, std::size_t n) {
    const double dy = row.y - row.center_y;
    const __m256d cxx = _mm256_set1_pd(-0.5 * row.conic_xx);
    const __m256d cxy_dy = _mm256_set1_pd(-row.conic_xy * dy);
    const __m256d base = _mm256_set1_pd(-0.5 * row.conic_yy * dy * dy);
    const __m256d opacity = _mm256_set1_pd(row.opacity);
    const __m256d amin = _mm256_set1_pd(row.alpha_min);
    const __m256d amax = _mm256_set1_pd(row.alpha_max);
    const __m256d rmin = _mm256_set1_pd(static_cast<double>(row.rect_min_x));
    const __m256d rmax = _mm256_set1_pd(static_cast<double>(row.rect_max_x));
    const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d x = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(row.x0 + static_cast<int>(k))), lane);
        const __m256d dx = _mm256_sub_pd(x, _mm256_set1_pd(row.center_x));
        // power = -0.5*cxx*dx^2 - cxy*dx*dy - 0.5*cyy*dy^2
        const __m256d power = _mm256_fmadd_pd(_mm256_mul_pd(cxx, dx), dx, _mm256_fmadd_pd(cxy_dy, dx, base));
        const __m256d g = exp_pd(power);
        const __m256d a = _mm256_mul_pd(opacity, g);
        const __m256d inside = _mm256_and_pd(_mm256_cmp_pd(x, rmin, _CMP_GE_OQ), _mm256_cmp_pd(x, rmax, _CMP_LE_OQ));
        const __m256d keep = _mm256_and_pd(inside, _mm256_cmp_pd(a, amin, _CMP_GE_OQ));
        _mm256_storeu_pd(gauss + k, g);
        _mm256_storeu_pd(alpha + k, _mm256_and_pd(keep, _mm256_min_pd(a, amax)));
    }
    for (; k < n; ++k) {
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

const KernelTable& avx2_table() {
    static const KernelTable table{dot_avx2, axpy_avx2, exp_avx2, splat_row_avx2};
    return table;
}

}  // namespace semsplat::simd::detail
