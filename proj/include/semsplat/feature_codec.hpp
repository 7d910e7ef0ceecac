// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace semsplat {

/// Dense layer y = W x + b, W stored row-major (out x in).
struct LinearLayer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Autoencoder between full-dimension embeddings (D_f) and compressed
/// features (d): D_f -> 256 -> 128 -> 64 -> 16 -> d and the mirror image,
/// ReLU between layers, linear outputs.
struct FeatureCodec {
    int full_dim = 0;
    int compressed_dim = 0;
    std::vector<LinearLayer> encoder;
    std::vector<LinearLayer> decoder;

    static std::vector<int> encoder_widths(int full_dim, int compressed_dim);
    static FeatureCodec zeros(int full_dim, int compressed_dim);
    static FeatureCodec initialized(int full_dim, int compressed_dim, std::uint64_t seed);

    void check_shapes() const;

    /// Row-wise over `rows` inputs; input length must be rows * full_dim.
    std::vector<double> encode(std::span<const double> input, std::size_t rows = 1) const;
    /// Decoder output without normalization.
    std::vector<double> decode_raw(std::span<const double> input, std::size_t rows = 1) const;
    /// Decoder output L2-normalized per row; all-zero rows stay zero.
    std::vector<double> decode(std::span<const double> input, std::size_t rows = 1) const;
};

/// Per-sample objective |x_hat - x|^2 + (1 - cos(x_hat, x)), averaged over the batch.
struct CodecLoss {
    double total = 0.0;
    double l2 = 0.0;
    double cosine = 0.0;
};

/// Loss on a batch and its gradient (accumulated into `grad`, shaped like `codec`).
CodecLoss codec_loss(const FeatureCodec& codec, std::span<const double> batch, std::size_t rows,
                     FeatureCodec* grad = nullptr);

struct CodecTrainOptions {
    int epochs = 40;
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t max_samples = 20000;  // random subset drawn from the dataset
    std::uint64_t seed = 0;
};

struct CodecTrainReport {
    std::vector<double> epoch_loss;
    CodecLoss final_loss;
    std::size_t samples = 0;
};

/// Trains with Adam on minibatches; throws Error(Divergence) naming the
/// iteration when the loss becomes non-finite.
CodecTrainReport train_codec(FeatureCodec& codec, std::span<const double> features, std::size_t rows,
                             const CodecTrainOptions& options);

/// Flat views over every parameter array, in a fixed order.
std::vector<std::span<double>> codec_parameters(FeatureCodec& codec);

}  // namespace semsplat
