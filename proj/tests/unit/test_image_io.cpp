// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixture.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"

using namespace semsplat;

namespace {

Image8 gradient_image(int w, int h, int c) {
    Image8 img{w, h, c, {}};
    for (int i = 0; i < w * h * c; ++i) img.pixels.push_back(static_cast<std::uint8_t>((i * 37) % 256));
    return img;
}

}  // namespace

TEST(ImageIo, QuantizeUnitRoundsAndClamps) {
    EXPECT_EQ(quantize_unit(-1.0), 0);
    EXPECT_EQ(quantize_unit(2.0), 255);
    EXPECT_EQ(quantize_unit(0.5), 128);
}

TEST(ImageIo, PngRoundTripRgbAndGray) {
    for (int c : {1, 3}) {
        const Image8 img = gradient_image(7, 5, c);
        const Image8 back = decode_png(encode_png(img));
        EXPECT_EQ(back.width, 7);
        EXPECT_EQ(back.height, 5);
        EXPECT_EQ(back.channels, c);
        EXPECT_EQ(back.pixels, img.pixels);
    }
}

TEST(ImageIo, PngEncodingIsDeterministic) {
    const Image8 img = gradient_image(16, 16, 3);
    EXPECT_EQ(encode_png(img), encode_png(img));
}

TEST(ImageIo, CorruptPngThrows) {
    std::vector<std::uint8_t> bytes = encode_png(gradient_image(4, 4, 1));
    bytes.resize(bytes.size() / 2);
    EXPECT_THROW(decode_png(bytes), Error);
}

TEST(ImageIo, PnmRoundTrip) {
    const auto dir = semsplat::testing::temp_dir("image_io");
    for (int c : {1, 3}) {
        const Image8 img = gradient_image(6, 3, c);
        const auto path = dir / (c == 1 ? "a.pgm" : "a.ppm");
        write_pnm(path, img);
        const Image8 back = read_pnm(path);
        EXPECT_EQ(back.pixels, img.pixels);
        EXPECT_EQ(back.channels, c);
    }
}

TEST(ImageIo, WriteImageChoosesFormatByExtension) {
    const auto dir = semsplat::testing::temp_dir("image_io_ext");
    const Image8 img = gradient_image(3, 3, 3);
    write_image(dir / "x.png", img);
    write_image(dir / "x.ppm", img);
    EXPECT_EQ(read_png(dir / "x.png").pixels, img.pixels);
    EXPECT_EQ(read_pnm(dir / "x.ppm").pixels, img.pixels);
}

TEST(ImageIo, MaskAndHeatmapImages) {
    const std::vector<std::uint8_t> mask = {0, 1, 1, 0};
    const Image8 m = mask_image(mask, 2, 2);
    EXPECT_EQ(m.channels, 1);
    EXPECT_EQ(m.pixels, (std::vector<std::uint8_t>{0, 255, 255, 0}));
    const std::vector<double> v = {0.0, 0.25, 0.5, 1.0};
    const Image8 h = heatmap_image(v, 2, 2);
    EXPECT_EQ(h.width, 2);
    EXPECT_EQ(h.pixels.size(), static_cast<std::size_t>(2 * 2 * h.channels));
}

TEST(ImageIo, Base64) {
    const std::string s = "any carnal pleas";
    EXPECT_EQ(base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), "YW55IGNhcm5hbCBwbGVhcw==");
    EXPECT_EQ(base64_encode({}), "");
}
