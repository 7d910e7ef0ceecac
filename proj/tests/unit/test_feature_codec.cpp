// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "semsplat/errors.hpp"
#include "semsplat/feature_codec.hpp"

using namespace semsplat;

namespace {

// Unit rows clustered around k axes, like per-pixel class embeddings.
std::vector<double> clustered_rows(std::size_t rows, int dim, int clusters, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<double> out(rows * dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const int k = static_cast<int>(r % clusters);
        double n2 = 0.0;
        for (int j = 0; j < dim; ++j) {
            out[r * dim + j] = (j == k ? 1.0 : 0.0) + noise(rng);
            n2 += out[r * dim + j] * out[r * dim + j];
        }
        for (int j = 0; j < dim; ++j) out[r * dim + j] /= std::sqrt(n2);
    }
    return out;
}

}  // namespace

TEST(FeatureCodec, LayerWidths) {
    EXPECT_EQ(FeatureCodec::encoder_widths(512, 3), (std::vector<int>{512, 256, 128, 64, 16, 3}));
    const FeatureCodec c = FeatureCodec::initialized(16, 3, 0);
    EXPECT_NO_THROW(c.check_shapes());
    EXPECT_EQ(c.encoder.front().in, 16);
    EXPECT_EQ(c.decoder.back().out, 16);
}

TEST(FeatureCodec, EncodeDecodeShapes) {
    const FeatureCodec c = FeatureCodec::initialized(8, 2, 1);
    const std::vector<double> x = clustered_rows(5, 8, 2, 0);
    const std::vector<double> z = c.encode(x, 5);
    EXPECT_EQ(z.size(), 10u);
    const std::vector<double> y = c.decode(z, 5);
    EXPECT_EQ(y.size(), 40u);
    for (int r = 0; r < 5; ++r) {
        double n2 = 0.0;
        for (int j = 0; j < 8; ++j) n2 += y[r * 8 + j] * y[r * 8 + j];
        EXPECT_NEAR(n2, 1.0, 1e-12);
    }
}

TEST(FeatureCodec, DecodeKeepsZeroRowsZero) {
    const FeatureCodec c = FeatureCodec::zeros(4, 2);
    const std::vector<double> z = {0.0, 0.0};
    for (double v : c.decode(z, 1)) EXPECT_EQ(v, 0.0);
}

TEST(FeatureCodec, WrongInputLengthThrows) {
    const FeatureCodec c = FeatureCodec::initialized(8, 2, 1);
    const std::vector<double> x(7, 0.0);
    EXPECT_THROW(c.encode(x, 1), Error);
}

TEST(FeatureCodec, LossMatchesDefinition) {
    const FeatureCodec c = FeatureCodec::initialized(6, 2, 3);
    const std::vector<double> x = clustered_rows(4, 6, 2, 1);
    const std::vector<double> y = c.decode_raw(c.encode(x, 4), 4);
    double expected = 0.0;
    for (int r = 0; r < 4; ++r) {
        double l2 = 0.0, dot = 0.0, ny = 0.0, nx = 0.0;
        for (int j = 0; j < 6; ++j) {
            const double a = y[r * 6 + j], b = x[r * 6 + j];
            l2 += (a - b) * (a - b);
            dot += a * b;
            ny += a * a;
            nx += b * b;
        }
        expected += l2 + 1.0 - dot / std::sqrt(ny * nx);
    }
    EXPECT_NEAR(codec_loss(c, x, 4).total, expected / 4.0, 1e-12);
}

TEST(FeatureCodec, TrainingReducesLossAndPreservesClusters) {
    const int dim = 8;
    const std::vector<double> x = clustered_rows(600, dim, 3, 2);
    FeatureCodec c = FeatureCodec::initialized(dim, 2, 4);
    const double before = codec_loss(c, x, 600).total;
    CodecTrainOptions opt;
    opt.epochs = 60;
    opt.batch_size = 64;
    opt.seed = 5;
    const CodecTrainReport rep = train_codec(c, x, 600, opt);
    EXPECT_LT(rep.final_loss.total, 0.1 * before);
    const std::vector<double> y = c.decode(c.encode(x, 600), 600);
    for (std::size_t r = 0; r < 600; ++r) {
        double cos = 0.0;
        for (int j = 0; j < dim; ++j) cos += y[r * dim + j] * x[r * dim + j];
        ASSERT_GT(cos, 0.9) << "row " << r;
    }
}

TEST(FeatureCodec, DivergenceIsReported) {
    const std::vector<double> x = clustered_rows(64, 4, 2, 3);
    FeatureCodec c = FeatureCodec::initialized(4, 2, 0);
    CodecTrainOptions opt;
    opt.learning_rate = 1e300;
    opt.epochs = 5;
    try {
        train_codec(c, x, 64, opt);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Divergence);
    }
}
