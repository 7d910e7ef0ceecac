// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "fixture.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/tensor_io.hpp"

using namespace semsplat;

namespace {

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_tensor(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode succeeded";
    return ErrorCode::InvalidArgument;
}

std::vector<std::uint8_t> sample_bytes() {
    const std::vector<float> v = {1.0f, -2.5f, 3.25f, 0.0f, 7.0f, 1e-20f};
    return encode_tensor(Tensor::from_f32({2, 3}, v));
}

}  // namespace

TEST(TensorIo, HeaderLayoutIsLittleEndian) {
    const auto b = sample_bytes();
    ASSERT_GE(b.size(), 8u + 16u + 24u + 4u);
    EXPECT_EQ(std::memcmp(b.data(), "STPG", 4), 0);
    EXPECT_EQ(b[4], 1);  // version u16 LE
    EXPECT_EQ(b[5], 0);
    EXPECT_EQ(b[6], 1);  // f32
    EXPECT_EQ(b[7], 2);  // ndim
    EXPECT_EQ(b[8], 2);  // dims[0] u64 LE
    EXPECT_EQ(b[16], 3);
    EXPECT_EQ(b.size(), 8u + 16u + 24u + 4u);
}

TEST(TensorIo, RoundTripEveryDtypeBitExact) {
    const std::vector<double> d = {0.1, -0.0, std::numeric_limits<double>::denorm_min(), 1e308};
    const std::vector<float> f = {0.1f, -3.0f, std::numeric_limits<float>::infinity()};
    const std::vector<std::uint8_t> u8 = {0, 1, 255};
    const std::vector<std::uint16_t> u16 = {0, 65535, 258, 7};
    EXPECT_EQ(decode_tensor(encode_tensor(Tensor::from_f64({4}, d))).to_f64(), d);
    const auto fr = decode_tensor(encode_tensor(Tensor::from_f32({3, 1}, f)));
    EXPECT_EQ(fr.to_f32(), f);
    EXPECT_EQ(fr.dims, (std::vector<std::uint64_t>{3, 1}));
    EXPECT_EQ(decode_tensor(encode_tensor(Tensor::from_u8({3}, u8))).to_u8(), u8);
    EXPECT_EQ(decode_tensor(encode_tensor(Tensor::from_u16({2, 2}, u16))).to_u16(), u16);
}

TEST(TensorIo, FileRoundTrip) {
    const auto dir = semsplat::testing::temp_dir("tensor_io");
    const std::vector<double> v = {1, 2, 3, 4, 5, 6};
    write_tensor(dir / "a.stpg", Tensor::from_f64({3, 2}, v));
    EXPECT_EQ(read_tensor(dir / "a.stpg").to_f64(), v);
}

TEST(TensorIo, FlippedPayloadByteIsCrcError) {
    auto b = sample_bytes();
    b[8 + 16 + 5] ^= 0x40;
    EXPECT_EQ(decode_error(b), ErrorCode::CrcMismatch);
}

TEST(TensorIo, BadMagic) {
    auto b = sample_bytes();
    b[0] = 'X';
    EXPECT_EQ(decode_error(b), ErrorCode::BadMagic);
}

TEST(TensorIo, UnknownVersionRejected) {
    const std::vector<std::uint64_t> dims = {1};
    const std::vector<std::uint8_t> payload = {7};
    EXPECT_EQ(decode_error(encode_raw(DType::U8, dims, payload, 2)), ErrorCode::UnsupportedVersion);
}

TEST(TensorIo, UnknownDtypeRejected) {
    auto b = sample_bytes();
    b[6] = 9;
    EXPECT_EQ(decode_error(b), ErrorCode::UnsupportedDtype);
}

TEST(TensorIo, TruncatedFiles) {
    const auto b = sample_bytes();
    EXPECT_EQ(decode_error({b.begin(), b.begin() + 6}), ErrorCode::Truncated);
    EXPECT_EQ(decode_error({b.begin(), b.begin() + 12}), ErrorCode::Truncated);
    EXPECT_EQ(decode_error({b.begin(), b.end() - 7}), ErrorCode::Truncated);
}

TEST(TensorIo, PayloadLengthDisagreeingWithDimsIsLengthError) {
    // dims (2,3) with a payload of 5 f32 values
    const std::vector<std::uint64_t> dims = {2, 3};
    const std::vector<std::uint8_t> payload(5 * 4, 0x11);
    EXPECT_EQ(decode_error(encode_raw(DType::F32, dims, payload)), ErrorCode::LengthMismatch);
}

TEST(TensorIo, EncodeRejectsInconsistentTensor) {
    Tensor t = Tensor::from_f32({2}, std::vector<float>{1, 2});
    t.dims = {3};
    try {
        encode_tensor(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
}

TEST(TensorIo, MissingFile) {
    try {
        read_tensor("/nonexistent/semsplat/x.stpg");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingFile);
    }
}

TEST(TensorIo, WrongDtypeAccessThrows) {
    const Tensor t = Tensor::from_u8({1}, std::vector<std::uint8_t>{1});
    EXPECT_THROW(t.to_f32(), Error);
}

TEST(TensorIo, Crc32KnownValue) {
    const std::string s = "123456789";
    EXPECT_EQ(crc32_of({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
}
