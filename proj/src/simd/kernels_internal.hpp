// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "semsplat/simd.hpp"

namespace semsplat::simd::detail {

const KernelTable& scalar_table();
#if defined(SEMSPLAT_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace semsplat::simd::detail
