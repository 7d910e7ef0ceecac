// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semsplat/errors.hpp"
#include "semsplat/tensor_io.hpp"

namespace semsplat {
namespace {

void check_image(const Image8& img) {
    if (img.width < 1 || img.height < 1 || (img.channels != 1 && img.channels != 3)) {
        fail(ErrorCode::InvalidArgument, "image must be non-empty with 1 or 3 channels");
    }
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
        fail(ErrorCode::ShapeMismatch, "image pixel buffer does not match its size");
    }
}

struct PngReader {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void png_error_fn(png_structp, png_const_charp msg) { throw Error(ErrorCode::Io, std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

void png_write_fn(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_fn(png_structp) {}

void png_read_fn(png_structp png, png_bytep data, png_size_t length) {
    auto* in = static_cast<PngReader*>(png_get_io_ptr(png));
    if (in->offset + length > in->bytes.size()) throw Error(ErrorCode::Truncated, "png: truncated stream");
    std::memcpy(data, in->bytes.data() + in->offset, length);
    in->offset += length;
}

}  // namespace

Image8 to_image8(std::span<const double> values, int width, int height, int channels) {
    Image8 img{width, height, channels, {}};
    if (values.size() != static_cast<std::size_t>(width) * height * channels) {
        fail(ErrorCode::ShapeMismatch, "to_image8: value count does not match the image size");
    }
    img.pixels.resize(values.size());
    std::transform(values.begin(), values.end(), img.pixels.begin(), quantize_unit);
    return img;
}

Image8 mask_image(std::span<const std::uint8_t> mask, int width, int height) {
    Image8 img{width, height, 1, {}};
    if (mask.size() != static_cast<std::size_t>(width) * height) {
        fail(ErrorCode::ShapeMismatch, "mask_image: mask does not match the image size");
    }
    img.pixels.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
    return img;
}

Image8 heatmap_image(std::span<const double> values, int width, int height) {
    Image8 img{width, height, 3, {}};
    if (values.size() != static_cast<std::size_t>(width) * height) {
        fail(ErrorCode::ShapeMismatch, "heatmap_image: value count does not match the image size");
    }
    img.pixels.resize(values.size() * 3);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i], 0.0, 1.0);
        img.pixels[3 * i] = quantize_unit(v);
        img.pixels[3 * i + 1] = quantize_unit(1.0 - std::abs(2.0 * v - 1.0));
        img.pixels[3 * i + 2] = quantize_unit(1.0 - v);
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const Image8& image) {
    check_image(image);
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) fail(ErrorCode::Io, "png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    try {
        if (!info) fail(ErrorCode::Io, "png: cannot create info struct");
        png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
        const int color = image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                     color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

Image8 decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) fail(ErrorCode::BadMagic, "not a PNG stream");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) fail(ErrorCode::Io, "png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    PngReader reader{bytes, 0};
    Image8 img;
    try {
        if (!info) fail(ErrorCode::Io, "png: cannot create info struct");
        png_set_read_fn(png, &reader, png_read_fn);
        png_read_info(png, info);
        png_set_strip_16(png);
        png_set_strip_alpha(png);
        png_set_packing(png);
        const int color = png_get_color_type(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = static_cast<int>(png_get_channels(png, info));
        if (img.channels != 1 && img.channels != 3) fail(ErrorCode::UnsupportedDtype, "png: unsupported channel layout");
        const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
        img.pixels.resize(stride * img.height);
        std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
        for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * stride;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::filesystem::path& path, const Image8& image) { write_file_bytes(path, encode_png(image)); }

Image8 read_png(const std::filesystem::path& path) {
    try {
        return decode_png(read_file_bytes(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_pnm(const std::filesystem::path& path, const Image8& image) {
    check_image(image);
    const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                               " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
    write_file_bytes(path, bytes);
}

Image8 read_pnm(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    std::size_t pos = 0;
    // Header tokens separated by whitespace; '#' comments run to end of line.
    auto token = [&]() {
        std::string tok;
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) break;
                ++pos;
            } else {
                tok.push_back(c);
                ++pos;
            }
        }
        return tok;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P6") fail(ErrorCode::BadMagic, path.string() + ": not a binary PGM/PPM file");
    Image8 img;
    img.channels = magic == "P6" ? 3 : 1;
    try {
        img.width = std::stoi(token());
        img.height = std::stoi(token());
        if (std::stoi(token()) != 255) fail(ErrorCode::UnsupportedDtype, path.string() + ": only maxval 255 is supported");
    } catch (const std::logic_error&) {
        fail(ErrorCode::Validation, path.string() + ": malformed PNM header");
    }
    ++pos;  // single whitespace before the raster
    const std::size_t size = static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (pos + size > bytes.size()) fail(ErrorCode::Truncated, path.string() + ": truncated PNM raster");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + size));
    return img;
}

void write_image(const std::filesystem::path& path, const Image8& image) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") {
        write_png(path, image);
    } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
        write_pnm(path, image);
    } else {
        fail(ErrorCode::InvalidArgument, "unsupported image extension '" + ext + "'");
    }
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char kTable[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kTable[(v >> 18) & 63];
        out += kTable[(v >> 12) & 63];
        out += kTable[(v >> 6) & 63];
        out += kTable[v & 63];
    }
    if (i < bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
        out += kTable[(v >> 18) & 63];
        out += kTable[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? kTable[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

}  // namespace semsplat
