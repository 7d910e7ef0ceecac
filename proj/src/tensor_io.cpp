// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/tensor_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'P', 'G'};
constexpr std::size_t kFixedHeader = 8;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

// Element-wise conversion between host values and little-endian bytes.
template <typename T, typename U>
std::vector<std::uint8_t> pack(std::span<const T> values) {
    static_assert(sizeof(T) == sizeof(U));
    std::vector<std::uint8_t> out(values.size() * sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
        if (!values.empty()) std::memcpy(out.data(), values.data(), out.size());
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            U u;
            std::memcpy(&u, &values[i], sizeof(U));
            for (std::size_t b = 0; b < sizeof(U); ++b) out[i * sizeof(U) + b] = static_cast<std::uint8_t>(u >> (8 * b));
        }
    }
    return out;
}

template <typename T, typename U>
std::vector<T> unpack(const std::vector<std::uint8_t>& bytes) {
    std::vector<T> out(bytes.size() / sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
        if (!out.empty()) std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const U u = get_le<U>(bytes.data() + i * sizeof(U));
            std::memcpy(&out[i], &u, sizeof(U));
        }
    }
    return out;
}

bool known_dtype(std::uint8_t code) { return code >= 1 && code <= 4; }

std::size_t product(std::span<const std::uint64_t> dims) {
    std::size_t n = 1;
    for (std::uint64_t d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

Tensor make(DType dtype, std::vector<std::uint64_t> dims, std::vector<std::uint8_t> payload, std::size_t count) {
    if (product(dims) != count) {
        fail(ErrorCode::ShapeMismatch,
             "tensor dims hold " + std::to_string(product(dims)) + " elements but " + std::to_string(count) + " given");
    }
    Tensor t;
    t.dtype = dtype;
    t.dims = std::move(dims);
    t.payload = std::move(payload);
    return t;
}

void expect(const Tensor& t, DType dtype) {
    if (t.dtype != dtype) {
        fail(ErrorCode::UnsupportedDtype,
             std::string("tensor holds ") + dtype_name(t.dtype) + ", requested " + dtype_name(dtype));
    }
}

}  // namespace

std::size_t dtype_size(DType dtype) {
    switch (dtype) {
        case DType::F32: return 4;
        case DType::F64: return 8;
        case DType::U8: return 1;
        case DType::U16: return 2;
    }
    fail(ErrorCode::UnsupportedDtype, "unknown dtype code " + std::to_string(static_cast<int>(dtype)));
}

const char* dtype_name(DType dtype) {
    switch (dtype) {
        case DType::F32: return "f32";
        case DType::F64: return "f64";
        case DType::U8: return "u8";
        case DType::U16: return "u16";
    }
    return "unknown";
}

std::size_t Tensor::element_count() const { return product(dims); }

Tensor Tensor::from_f64(std::vector<std::uint64_t> dims, std::span<const double> values) {
    return make(DType::F64, std::move(dims), pack<double, std::uint64_t>(values), values.size());
}
Tensor Tensor::from_f32(std::vector<std::uint64_t> dims, std::span<const float> values) {
    return make(DType::F32, std::move(dims), pack<float, std::uint32_t>(values), values.size());
}
Tensor Tensor::from_u8(std::vector<std::uint64_t> dims, std::span<const std::uint8_t> values) {
    return make(DType::U8, std::move(dims), std::vector<std::uint8_t>(values.begin(), values.end()), values.size());
}
Tensor Tensor::from_u16(std::vector<std::uint64_t> dims, std::span<const std::uint16_t> values) {
    return make(DType::U16, std::move(dims), pack<std::uint16_t, std::uint16_t>(values), values.size());
}

std::vector<double> Tensor::to_f64() const {
    expect(*this, DType::F64);
    return unpack<double, std::uint64_t>(payload);
}
std::vector<float> Tensor::to_f32() const {
    expect(*this, DType::F32);
    return unpack<float, std::uint32_t>(payload);
}
std::vector<std::uint8_t> Tensor::to_u8() const {
    expect(*this, DType::U8);
    return payload;
}
std::vector<std::uint16_t> Tensor::to_u16() const {
    expect(*this, DType::U16);
    return unpack<std::uint16_t, std::uint16_t>(payload);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    const std::uint8_t* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_raw(DType dtype, std::span<const std::uint64_t> dims,
                                     std::span<const std::uint8_t> payload, std::uint16_t version) {
    if (dims.size() > 255) fail(ErrorCode::InvalidArgument, "tensor rank exceeds 255");
    std::vector<std::uint8_t> out;
    out.reserve(kFixedHeader + 8 * dims.size() + payload.size() + 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_le<std::uint16_t>(out, version);
    out.push_back(static_cast<std::uint8_t>(dtype));
    out.push_back(static_cast<std::uint8_t>(dims.size()));
    for (std::uint64_t d : dims) put_le<std::uint64_t>(out, d);
    out.insert(out.end(), payload.begin(), payload.end());
    put_le<std::uint32_t>(out, crc32_of(payload));
    return out;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
    if (tensor.payload.size() != tensor.element_count() * dtype_size(tensor.dtype)) {
        fail(ErrorCode::LengthMismatch, "tensor payload does not match its dims");
    }
    return encode_raw(tensor.dtype, tensor.dims, tensor.payload);
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
        fail(ErrorCode::BadMagic, "not a tensor container (bad magic)");
    }
    if (bytes.size() < kFixedHeader) fail(ErrorCode::Truncated, "tensor container truncated in header");
    const auto version = get_le<std::uint16_t>(bytes.data() + 4);
    if (version != Tensor::kVersion) {
        fail(ErrorCode::UnsupportedVersion, "unsupported tensor container version " + std::to_string(version));
    }
    const std::uint8_t code = bytes[6];
    if (!known_dtype(code)) fail(ErrorCode::UnsupportedDtype, "unsupported dtype code " + std::to_string(code));
    const std::size_t ndim = bytes[7];
    const std::size_t header = kFixedHeader + 8 * ndim;
    if (bytes.size() < header) fail(ErrorCode::Truncated, "tensor container truncated in dims");

    Tensor t;
    t.dtype = static_cast<DType>(code);
    for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get_le<std::uint64_t>(bytes.data() + kFixedHeader + 8 * i));
    const std::size_t expected = t.element_count() * dtype_size(t.dtype);
    const std::size_t remaining = bytes.size() - header;

    if (remaining != expected + 4) {
        // A self-consistent trailer means the writer emitted the wrong payload
        // length; otherwise the file was cut short.
        if (remaining >= 4) {
            const auto stored = get_le<std::uint32_t>(bytes.data() + bytes.size() - 4);
            if (stored == crc32_of(bytes.subspan(header, remaining - 4)) || remaining > expected + 4) {
                fail(ErrorCode::LengthMismatch, "payload holds " + std::to_string(remaining - 4) +
                                                    " bytes, dims require " + std::to_string(expected));
            }
        }
        fail(ErrorCode::Truncated, "tensor container truncated in payload");
    }
    const std::span<const std::uint8_t> payload = bytes.subspan(header, expected);
    const auto stored = get_le<std::uint32_t>(bytes.data() + header + expected);
    if (stored != crc32_of(payload)) fail(ErrorCode::CrcMismatch, "tensor payload CRC mismatch");
    t.payload.assign(payload.begin(), payload.end());
    return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
        fail(ErrorCode::Io, "failed reading " + path.string());
    }
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "failed writing " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    write_file_bytes(path, encode_tensor(tensor));
}

Tensor read_tensor(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    try {
        return decode_tensor(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.filename().string() + ": " + e.what());
    }
}

}  // namespace semsplat
