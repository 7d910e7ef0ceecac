// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstddef>

namespace semsplat::detail {

/// Runs fn(begin, end, chunk) over fixed-size chunks of [0, n). Chunk
/// boundaries depend only on n and chunk_size, so per-chunk partial results
/// reduced in chunk order are deterministic regardless of thread count.
template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t chunk_size, Fn&& fn) {
    const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
    tbb::parallel_for(
        tbb::blocked_range<std::size_t>(0, chunks, 1),
        [&](const tbb::blocked_range<std::size_t>& range) {
            for (std::size_t c = range.begin(); c != range.end(); ++c) {
                fn(c * chunk_size, std::min(n, (c + 1) * chunk_size), c);
            }
        },
        tbb::simple_partitioner());
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) { return (n + chunk_size - 1) / chunk_size; }

}  // namespace semsplat::detail
