// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <string>

#include "semsplat/deformation.hpp"
#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

constexpr int kC = SemanticTracker::kChannels;
constexpr int kK = SemanticTracker::kKernel;

}  // namespace

SemanticTracker SemanticTracker::zeros(int feature_dim) {
    if (feature_dim < 1) fail(ErrorCode::InvalidArgument, "tracker feature dimension must be positive");
    SemanticTracker t;
    t.feature_dim = feature_dim;
    const int len = feature_dim + 1;
    t.conv1_weights.assign(kC * kK, 0.0);
    t.conv1_bias.assign(kC, 0.0);
    t.conv2_weights.assign(kC * kC * kK, 0.0);
    t.conv2_bias.assign(kC, 0.0);
    t.head_weights.assign(static_cast<std::size_t>(feature_dim) * kC * len, 0.0);
    t.head_bias.assign(feature_dim, 0.0);
    return t;
}

SemanticTracker SemanticTracker::initialized(int feature_dim, std::uint64_t seed) {
    SemanticTracker t = zeros(feature_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / kK));
    std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / (kC * kK)));
    for (double& w : t.conv1_weights) w = n1(rng);
    for (double& w : t.conv2_weights) w = n2(rng);
    return t;
}

void SemanticTracker::check_shapes() const {
    const std::size_t len = static_cast<std::size_t>(sequence_length());
    if (feature_dim < 1 || conv1_weights.size() != kC * kK || conv1_bias.size() != kC ||
        conv2_weights.size() != kC * kC * kK || conv2_bias.size() != kC ||
        head_weights.size() != static_cast<std::size_t>(feature_dim) * kC * len ||
        head_bias.size() != static_cast<std::size_t>(feature_dim)) {
        fail(ErrorCode::ShapeMismatch, "tracker weights do not match feature dimension " + std::to_string(feature_dim));
    }
}

void tracker_forward(const SemanticTracker& tracker, std::span<const double> input, std::span<double> out,
                     TrackerActivations* activations) {
    const int len = tracker.sequence_length();
    const int d = tracker.feature_dim;
    double pre1[kC * 8], pre2[kC * 8];
    std::vector<double> heap1, heap2;
    double* p1 = pre1;
    double* p2 = pre2;
    if (len > 8) {
        heap1.resize(kC * len);
        heap2.resize(kC * len);
        p1 = heap1.data();
        p2 = heap2.data();
    }

    for (int o = 0; o < kC; ++o) {
        for (int p = 0; p < len; ++p) {
            double s = tracker.conv1_bias[o];
            for (int k = 0; k < kK; ++k) {
                const int q = p + k - 1;
                if (q >= 0 && q < len) s += tracker.conv1_weights[o * kK + k] * input[q];
            }
            p1[o * len + p] = s;
        }
    }
    for (int o = 0; o < kC; ++o) {
        for (int p = 0; p < len; ++p) {
            double s = tracker.conv2_bias[o];
            for (int i = 0; i < kC; ++i) {
                const double* w = &tracker.conv2_weights[(o * kC + i) * kK];
                const double* r = p1 + i * len;
                for (int k = 0; k < kK; ++k) {
                    const int q = p + k - 1;
                    if (q >= 0 && q < len && r[q] > 0.0) s += w[k] * r[q];
                }
            }
            p2[o * len + p] = s;
        }
    }
    const int flat = kC * len;
    for (int o = 0; o < d; ++o) {
        double s = tracker.head_bias[o];
        const double* w = &tracker.head_weights[static_cast<std::size_t>(o) * flat];
        for (int c = 0; c < flat; ++c) {
            if (p2[c] > 0.0) s += w[c] * p2[c];
        }
        out[o] = s;
    }
    if (activations) {
        activations->pre1.assign(p1, p1 + flat);
        activations->pre2.assign(p2, p2 + flat);
    }
}

void tracker_backward(const SemanticTracker& tracker, std::span<const double> input,
                      std::span<const double> upstream, SemanticTracker& grad, std::span<double> d_input) {
    const int len = tracker.sequence_length();
    const int d = tracker.feature_dim;
    const int flat = kC * len;
    TrackerActivations act;
    std::vector<double> scratch(d);
    tracker_forward(tracker, input, scratch, &act);
    const std::vector<double>& p1 = act.pre1;
    const std::vector<double>& p2 = act.pre2;

    std::vector<double> d_pre2(flat, 0.0);
    for (int o = 0; o < d; ++o) {
        const double u = upstream[o];
        if (u == 0.0) continue;
        grad.head_bias[o] += u;
        const double* w = &tracker.head_weights[static_cast<std::size_t>(o) * flat];
        double* gw = &grad.head_weights[static_cast<std::size_t>(o) * flat];
        for (int c = 0; c < flat; ++c) {
            if (p2[c] > 0.0) {
                gw[c] += u * p2[c];
                d_pre2[c] += u * w[c];
            }
        }
    }

    std::vector<double> d_r1(flat, 0.0);
    for (int o = 0; o < kC; ++o) {
        for (int p = 0; p < len; ++p) {
            const double g = d_pre2[o * len + p];
            if (g == 0.0) continue;
            grad.conv2_bias[o] += g;
            for (int i = 0; i < kC; ++i) {
                const double* w = &tracker.conv2_weights[(o * kC + i) * kK];
                double* gw = &grad.conv2_weights[(o * kC + i) * kK];
                for (int k = 0; k < kK; ++k) {
                    const int q = p + k - 1;
                    if (q < 0 || q >= len) continue;
                    const double r = p1[i * len + q];
                    if (r > 0.0) {
                        gw[k] += g * r;
                        d_r1[i * len + q] += g * w[k];
                    }
                }
            }
        }
    }

    for (int q = 0; q < len; ++q) d_input[q] = 0.0;
    for (int o = 0; o < kC; ++o) {
        for (int p = 0; p < len; ++p) {
            if (!(p1[o * len + p] > 0.0)) continue;
            const double g = d_r1[o * len + p];
            if (g == 0.0) continue;
            grad.conv1_bias[o] += g;
            for (int k = 0; k < kK; ++k) {
                const int q = p + k - 1;
                if (q < 0 || q >= len) continue;
                grad.conv1_weights[o * kK + k] += g * input[q];
                d_input[q] += g * tracker.conv1_weights[o * kK + k];
            }
        }
    }
}

}  // namespace semsplat
