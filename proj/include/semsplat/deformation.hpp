// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/gaussian_scene.hpp"

namespace semsplat {

/// One bank of time-basis deformation parameters:
///   psi_ic(t) = sum_j w_icj * exp(-(t - theta_j)^2 / (2 sigma_j^2))
/// Weights are per Gaussian i and output channel c; centers and widths are
/// shared by every Gaussian of the bank.
struct FdmParams {
    int basis_count = 0;
    int channels = 0;
    std::vector<double> weights;  // N*C*B, index (i*C + c)*B + j
    std::vector<double> centers;  // B, normalized time
    std::vector<double> widths;   // B, > kMinWidth

    static constexpr double kMinWidth = 1e-6;

    /// Zero weights, centers uniformly spaced on [0,1], widths 1/B.
    static FdmParams identity(std::size_t gaussians, int channels, int basis_count);

    std::size_t gaussian_count() const {
        return channels > 0 && basis_count > 0 ? weights.size() / (static_cast<std::size_t>(channels) * basis_count) : 0;
    }
    std::span<const double> weight_row(std::size_t i, int c) const {
        return {weights.data() + (i * channels + c) * basis_count, static_cast<std::size_t>(basis_count)};
    }
    void clamp_widths();
    void check_shapes(std::size_t gaussians) const;
};

/// Basis values b_j(t) for a bank (length B).
void fdm_basis(const FdmParams& params, double t, std::span<double> basis);
/// psi for every Gaussian and channel (length N*C).
std::vector<double> fdm_eval(const FdmParams& params, double t);
/// Gradient of sum(upstream .* psi(t)) w.r.t. weights, centers and widths,
/// accumulated into `grad` (shaped like `params`).
void fdm_backward(const FdmParams& params, double t, std::span<const double> upstream, FdmParams& grad);
FdmParams fdm_backward(const FdmParams& params, double t, std::span<const double> upstream);

struct DeformationField {
    FdmParams mean;      // 3 channels
    FdmParams rotation;  // 4 channels
    FdmParams scale;     // 3 channels
    FdmParams feature;   // 1 channel, gate input

    static DeformationField identity(std::size_t gaussians, int basis_count);
    void clamp_widths();
    void check_shapes(std::size_t gaussians) const;
};

struct DeformedGeometry {
    std::vector<double> means;        // N*3
    std::vector<double> rotations;    // N*4, unit
    std::vector<double> raw_norms;    // N, |r + psi_r| before renormalization
    std::vector<double> log_scales;   // N*3
};

/// mu' = mu + psi_mu, r' = normalize(r + psi_r), s' = s + psi_s.
/// Throws Error(DegenerateRotation) when r + psi_r is (near) zero.
DeformedGeometry deform_gaussian(const GaussianCloud& cloud, const DeformationField& field, double t);

void deform_gaussian_backward(const GaussianCloud& cloud, const DeformationField& field, double t,
                              const DeformedGeometry& geometry, std::span<const double> d_means,
                              std::span<const double> d_rotations, std::span<const double> d_log_scales,
                              GaussianCloud& cloud_grad, DeformationField& field_grad);

/// Shared feature tracker g: Conv1d(1->16,k3,same) -> ReLU -> Conv1d(16->16,k3,same)
/// -> ReLU -> Linear(16*(d+1) -> d), applied to the sequence [f_1..f_d, t].
struct SemanticTracker {
    static constexpr int kChannels = 16;
    static constexpr int kKernel = 3;

    int feature_dim = 0;
    double slope = 2.5;
    std::vector<double> conv1_weights;  // 16*1*3
    std::vector<double> conv1_bias;     // 16
    std::vector<double> conv2_weights;  // 16*16*3, index (o*16 + i)*3 + k
    std::vector<double> conv2_bias;     // 16
    std::vector<double> head_weights;   // d * 16*(d+1), index o*(16*L) + c*L + pos
    std::vector<double> head_bias;      // d

    static SemanticTracker zeros(int feature_dim);
    /// He-initialized convolutions and a zero head, so g == 0 at initialization.
    static SemanticTracker initialized(int feature_dim, std::uint64_t seed);

    int sequence_length() const { return feature_dim + 1; }
    void check_shapes() const;
};

/// Pre-activations kept for backward and kink diagnostics.
struct TrackerActivations {
    std::vector<double> pre1;  // 16*L
    std::vector<double> pre2;  // 16*L
};

/// Evaluates g(input) for one input sequence of length d+1.
void tracker_forward(const SemanticTracker& tracker, std::span<const double> input, std::span<double> out,
                     TrackerActivations* activations = nullptr);
/// Accumulates weight gradients into `grad` and writes d(input) (length d+1).
void tracker_backward(const SemanticTracker& tracker, std::span<const double> input,
                      std::span<const double> upstream, SemanticTracker& grad, std::span<double> d_input);

struct DeformedFeatures {
    std::vector<double> features;      // N*d, f'
    std::vector<double> beta;          // N
    std::vector<double> tracker_out;   // N*d, g(concat(f,t))
};

/// f' = f + g(concat(f,t)) * beta, beta = sigmoid(slope * psi_f(t)).
DeformedFeatures deform_feature(const GaussianCloud& cloud, const SemanticTracker& tracker, const FdmParams& gate,
                                double t);

void deform_feature_backward(const GaussianCloud& cloud, const SemanticTracker& tracker, const FdmParams& gate,
                             double t, const DeformedFeatures& deformed, std::span<const double> d_features,
                             GaussianCloud& cloud_grad, SemanticTracker& tracker_grad, FdmParams& gate_grad);

}  // namespace semsplat
