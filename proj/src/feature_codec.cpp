// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/feature_codec.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "semsplat/adam.hpp"
#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

constexpr int kHidden[] = {256, 128, 64, 16};

LinearLayer make_layer(int in, int out) {
    LinearLayer l;
    l.in = in;
    l.out = out;
    l.weights.assign(static_cast<std::size_t>(in) * out, 0.0);
    l.bias.assign(static_cast<std::size_t>(out), 0.0);
    return l;
}

// Every layer of the autoencoder in evaluation order; `relu_after[i]` marks hidden layers.
struct Chain {
    std::vector<const LinearLayer*> layers;
    std::vector<bool> relu_after;
};

Chain encoder_chain(const FeatureCodec& c) {
    Chain ch;
    for (std::size_t i = 0; i < c.encoder.size(); ++i) {
        ch.layers.push_back(&c.encoder[i]);
        ch.relu_after.push_back(i + 1 < c.encoder.size());
    }
    return ch;
}

Chain decoder_chain(const FeatureCodec& c) {
    Chain ch;
    for (std::size_t i = 0; i < c.decoder.size(); ++i) {
        ch.layers.push_back(&c.decoder[i]);
        ch.relu_after.push_back(i + 1 < c.decoder.size());
    }
    return ch;
}

RowMat apply_layer(const LinearLayer& l, const RowMat& x) {
    ConstMap w(l.weights.data(), l.out, l.in);
    Eigen::Map<const Eigen::RowVectorXd> b(l.bias.data(), l.out);
    RowMat z = x * w.transpose();
    z.rowwise() += b;
    return z;
}

RowMat run_chain(const Chain& ch, RowMat x) {
    for (std::size_t i = 0; i < ch.layers.size(); ++i) {
        x = apply_layer(*ch.layers[i], x);
        if (ch.relu_after[i]) x = x.cwiseMax(0.0);
    }
    return x;
}

RowMat to_matrix(std::span<const double> input, std::size_t rows, int cols, const char* what) {
    if (input.size() != rows * static_cast<std::size_t>(cols)) {
        fail(ErrorCode::InvalidArgument, std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                             std::to_string(cols) + " values, got " + std::to_string(input.size()));
    }
    return ConstMap(input.data(), static_cast<Eigen::Index>(rows), cols);
}

std::vector<double> to_vector(const RowMat& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

}  // namespace

std::vector<int> FeatureCodec::encoder_widths(int full_dim, int compressed_dim) {
    std::vector<int> w{full_dim};
    w.insert(w.end(), std::begin(kHidden), std::end(kHidden));
    w.push_back(compressed_dim);
    return w;
}

FeatureCodec FeatureCodec::zeros(int full_dim, int compressed_dim) {
    if (full_dim < 1 || compressed_dim < 1) fail(ErrorCode::InvalidArgument, "codec dimensions must be positive");
    FeatureCodec c;
    c.full_dim = full_dim;
    c.compressed_dim = compressed_dim;
    const std::vector<int> w = encoder_widths(full_dim, compressed_dim);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) c.encoder.push_back(make_layer(w[i], w[i + 1]));
    for (std::size_t i = w.size() - 1; i > 0; --i) c.decoder.push_back(make_layer(w[i], w[i - 1]));
    return c;
}

FeatureCodec FeatureCodec::initialized(int full_dim, int compressed_dim, std::uint64_t seed) {
    FeatureCodec c = zeros(full_dim, compressed_dim);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::vector<LinearLayer>& layers) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            LinearLayer& l = layers[i];
            const double gain = i + 1 < layers.size() ? 2.0 : 1.0;
            std::normal_distribution<double> dist(0.0, std::sqrt(gain / l.in));
            for (double& w : l.weights) w = dist(rng);
        }
    };
    fill(c.encoder);
    fill(c.decoder);
    return c;
}

void FeatureCodec::check_shapes() const {
    const std::vector<int> w = encoder_widths(full_dim, compressed_dim);
    const std::size_t n = w.size() - 1;
    if (encoder.size() != n || decoder.size() != n) fail(ErrorCode::ShapeMismatch, "codec: wrong layer count");
    for (std::size_t i = 0; i < n; ++i) {
        const LinearLayer& e = encoder[i];
        const LinearLayer& d = decoder[i];
        const bool enc_ok = e.in == w[i] && e.out == w[i + 1];
        const bool dec_ok = d.in == w[n - i] && d.out == w[n - i - 1];
        if (!enc_ok || !dec_ok) fail(ErrorCode::ShapeMismatch, "codec: layer " + std::to_string(i) + " has wrong width");
        for (const LinearLayer* l : {&e, &d}) {
            if (l->weights.size() != static_cast<std::size_t>(l->in) * l->out ||
                l->bias.size() != static_cast<std::size_t>(l->out)) {
                fail(ErrorCode::ShapeMismatch, "codec: layer " + std::to_string(i) + " storage size mismatch");
            }
        }
    }
}

std::vector<double> FeatureCodec::encode(std::span<const double> input, std::size_t rows) const {
    return to_vector(run_chain(encoder_chain(*this), to_matrix(input, rows, full_dim, "encode")));
}

std::vector<double> FeatureCodec::decode_raw(std::span<const double> input, std::size_t rows) const {
    return to_vector(run_chain(decoder_chain(*this), to_matrix(input, rows, compressed_dim, "decode")));
}

std::vector<double> FeatureCodec::decode(std::span<const double> input, std::size_t rows) const {
    std::vector<double> out = decode_raw(input, rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = out.data() + r * full_dim;
        double n2 = 0.0;
        for (int k = 0; k < full_dim; ++k) n2 += row[k] * row[k];
        if (n2 == 0.0) continue;
        const double inv = 1.0 / std::sqrt(n2);
        for (int k = 0; k < full_dim; ++k) row[k] *= inv;
    }
    return out;
}

CodecLoss codec_loss(const FeatureCodec& codec, std::span<const double> batch, std::size_t rows, FeatureCodec* grad) {
    if (rows == 0) fail(ErrorCode::InvalidArgument, "codec_loss: empty batch");
    const RowMat x = to_matrix(batch, rows, codec.full_dim, "codec_loss");

    std::vector<const LinearLayer*> layers;
    std::vector<bool> relu;
    const Chain enc = encoder_chain(codec);
    const Chain dec = decoder_chain(codec);
    layers.insert(layers.end(), enc.layers.begin(), enc.layers.end());
    layers.insert(layers.end(), dec.layers.begin(), dec.layers.end());
    relu.insert(relu.end(), enc.relu_after.begin(), enc.relu_after.end());
    relu.insert(relu.end(), dec.relu_after.begin(), dec.relu_after.end());

    // inputs[i] feeds layer i; pre[i] is its pre-activation.
    std::vector<RowMat> inputs{x};
    std::vector<RowMat> pre;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        pre.push_back(apply_layer(*layers[i], inputs.back()));
        inputs.push_back(relu[i] ? RowMat(pre.back().cwiseMax(0.0)) : pre.back());
    }
    const RowMat& y = inputs.back();

    CodecLoss loss;
    RowMat dy(y.rows(), y.cols());
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const auto yr = y.row(r);
        const auto xr = x.row(r);
        const Eigen::RowVectorXd diff = yr - xr;
        loss.l2 += diff.squaredNorm() * inv_rows;
        const double ny = yr.norm();
        const double nx = xr.norm();
        double cosv = 0.0;
        Eigen::RowVectorXd dcos = Eigen::RowVectorXd::Zero(y.cols());
        if (ny > 1e-12 && nx > 1e-12) {
            cosv = yr.dot(xr) / (ny * nx);
            dcos = xr / (ny * nx) - cosv * yr / (ny * ny);
        }
        loss.cosine += (1.0 - cosv) * inv_rows;
        dy.row(r) = (2.0 * diff - dcos) * inv_rows;
    }
    loss.total = loss.l2 + loss.cosine;
    if (!grad) return loss;

    std::vector<LinearLayer*> glayers;
    for (LinearLayer& l : grad->encoder) glayers.push_back(&l);
    for (LinearLayer& l : grad->decoder) glayers.push_back(&l);
    RowMat dz = dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
        if (relu[i]) dz = dz.cwiseProduct((pre[i].array() > 0.0).cast<double>().matrix());
        LinearLayer& g = *glayers[i];
        Map(g.weights.data(), g.out, g.in) += dz.transpose() * inputs[i];
        Eigen::Map<Eigen::RowVectorXd>(g.bias.data(), g.out) += dz.colwise().sum();
        if (i > 0) dz = dz * ConstMap(layers[i]->weights.data(), layers[i]->out, layers[i]->in);
    }
    return loss;
}

std::vector<std::span<double>> codec_parameters(FeatureCodec& codec) {
    std::vector<std::span<double>> out;
    for (LinearLayer& l : codec.encoder) {
        out.emplace_back(l.weights);
        out.emplace_back(l.bias);
    }
    for (LinearLayer& l : codec.decoder) {
        out.emplace_back(l.weights);
        out.emplace_back(l.bias);
    }
    return out;
}

CodecTrainReport train_codec(FeatureCodec& codec, std::span<const double> features, std::size_t rows,
                             const CodecTrainOptions& options) {
    codec.check_shapes();
    if (rows < 2) fail(ErrorCode::InvalidArgument, "train_codec: need at least 2 samples");
    if (features.size() != rows * static_cast<std::size_t>(codec.full_dim)) {
        fail(ErrorCode::InvalidArgument, "train_codec: feature array does not match rows x full_dim");
    }
    if (options.batch_size == 0) fail(ErrorCode::InvalidArgument, "train_codec: batch_size must be positive");

    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> pool(rows);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    if (rows > options.max_samples) {
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(options.max_samples);
        std::sort(pool.begin(), pool.end());
    }
    const std::size_t dim = static_cast<std::size_t>(codec.full_dim);

    std::vector<std::size_t> sizes;
    for (std::span<double> p : codec_parameters(codec)) sizes.push_back(p.size());
    AdamOptimizer adam(sizes, AdamConfig{0.9, 0.999, 1e-8});

    CodecTrainReport report;
    report.samples = pool.size();
    std::vector<double> batch;
    std::int64_t iteration = 0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(pool.begin(), pool.end(), rng);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < pool.size(); start += options.batch_size) {
            const std::size_t count = std::min(options.batch_size, pool.size() - start);
            batch.resize(count * dim);
            for (std::size_t r = 0; r < count; ++r) {
                std::copy_n(features.data() + pool[start + r] * dim, dim, batch.data() + r * dim);
            }
            FeatureCodec grad = FeatureCodec::zeros(codec.full_dim, codec.compressed_dim);
            const CodecLoss loss = codec_loss(codec, batch, count, &grad);
            if (!std::isfinite(loss.total)) {
                fail(ErrorCode::Divergence, "codec training diverged at iteration " + std::to_string(iteration));
            }
            epoch_sum += loss.total * static_cast<double>(count);
            std::vector<std::span<const double>> grads;
            for (std::span<double> g : codec_parameters(grad)) grads.emplace_back(g);
            adam.step(codec_parameters(codec), grads, options.learning_rate, {});
            ++iteration;
        }
        report.epoch_loss.push_back(epoch_sum / static_cast<double>(pool.size()));
    }

    batch.resize(pool.size() * dim);
    for (std::size_t r = 0; r < pool.size(); ++r) {
        std::copy_n(features.data() + pool[r] * dim, dim, batch.data() + r * dim);
    }
    report.final_loss = codec_loss(codec, batch, pool.size());
    return report;
}

}  // namespace semsplat
