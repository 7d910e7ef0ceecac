// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace semsplat {

/// 8-bit interleaved image with 1 (gray) or 3 (RGB) channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

inline std::uint8_t quantize_unit(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<std::uint8_t>(c * 255.0 + 0.5);
}

/// Quantizes an H*W*channels map in [0,1].
Image8 to_image8(std::span<const double> values, int width, int height, int channels);
/// Gray image from a boolean mask (255 = set).
Image8 mask_image(std::span<const std::uint8_t> mask, int width, int height);
/// Scalar map in [0,1] rendered through a fixed blue-to-red ramp.
Image8 heatmap_image(std::span<const double> values, int width, int height);

std::vector<std::uint8_t> encode_png(const Image8& image);
Image8 decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path);

/// Binary PGM (P5) for 1 channel, PPM (P6) for 3 channels.
void write_pnm(const std::filesystem::path& path, const Image8& image);
Image8 read_pnm(const std::filesystem::path& path);

/// Writes PNG or PNM depending on the extension (.png, .pgm, .ppm, .pnm).
void write_image(const std::filesystem::path& path, const Image8& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace semsplat
