// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace semsplat {

/// One supervised time step. Maps are row-major, channels innermost.
struct FrameSample {
    std::string name;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> color;    // H*W*3
    std::vector<float> depth;           // H*W, 0 marks invalid
    int feature_dim = 0;
    std::vector<float> features;        // H*W*feature_dim, compressed
    std::vector<std::uint16_t> labels;  // H*W region ids, 0 = unlabeled; may be empty
    double timestamp = 0.0;             // normalized to [0,1]

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool has_labels() const { return !labels.empty(); }
};

}  // namespace semsplat
