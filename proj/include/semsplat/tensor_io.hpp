// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace semsplat {

enum class DType : std::uint8_t { F32 = 1, F64 = 2, U8 = 3, U16 = 4 };

std::size_t dtype_size(DType dtype);
const char* dtype_name(DType dtype);

/// In-memory tensor: dtype, shape and the little-endian payload bytes.
struct Tensor {
    static constexpr std::uint16_t kVersion = 1;

    DType dtype = DType::F64;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> payload;

    std::size_t element_count() const;

    static Tensor from_f64(std::vector<std::uint64_t> dims, std::span<const double> values);
    static Tensor from_f32(std::vector<std::uint64_t> dims, std::span<const float> values);
    static Tensor from_u8(std::vector<std::uint64_t> dims, std::span<const std::uint8_t> values);
    static Tensor from_u16(std::vector<std::uint64_t> dims, std::span<const std::uint16_t> values);

    /// Typed readers; throw Error(UnsupportedDtype) on a dtype mismatch.
    std::vector<double> to_f64() const;
    std::vector<float> to_f32() const;
    std::vector<std::uint8_t> to_u8() const;
    std::vector<std::uint16_t> to_u16() const;
};

/// Container bytes: "STPG", u16 version, u8 dtype, u8 ndim, u64 dims,
/// payload, u32 CRC32 of the payload. All integers little-endian.
std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
/// Same layout with an arbitrary payload; used to produce malformed files.
std::vector<std::uint8_t> encode_raw(DType dtype, std::span<const std::uint64_t> dims,
                                     std::span<const std::uint8_t> payload, std::uint16_t version = Tensor::kVersion);
/// Throws BadMagic, UnsupportedVersion, UnsupportedDtype, Truncated,
/// LengthMismatch or CrcMismatch.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace semsplat
