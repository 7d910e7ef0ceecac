// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"
#include "semsplat/errors.hpp"

namespace semsplat::simd {
namespace {

bool probe_avx2() {
#if defined(SEMSPLAT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

bool cpu_has_avx2() {
    static const bool has = probe_avx2();
    return has;
}

Backend detect_default() {
    if (const char* env = std::getenv("SEMSPLAT_SIMD")) {
        const std::string_view v(env);
        if (v == "scalar") return Backend::Scalar;
        if (v == "avx2" && cpu_has_avx2()) return Backend::Avx2;
    }
    return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& active() {
    static std::atomic<Backend> backend{detect_default()};
    return backend;
}

}  // namespace

const char* backend_name(Backend backend) {
    return backend == Backend::Avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend backend) {
    return backend == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
    if (!backend_available(backend)) {
        fail(ErrorCode::InvalidArgument, std::string("SIMD backend not available: ") + backend_name(backend));
    }
    active().store(backend, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Backend backend) {
#if defined(SEMSPLAT_HAVE_AVX2)
    if (backend == Backend::Avx2 && cpu_has_avx2()) return detail::avx2_table();
#endif
    (void)backend;
    return detail::scalar_table();
}

const KernelTable& kernels() { return kernels_for(active_backend()); }

}  // namespace semsplat::simd
