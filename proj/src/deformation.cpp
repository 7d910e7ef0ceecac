// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/deformation.hpp"

#include <cmath>
#include <string>

#include "parallel.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/simd.hpp"

namespace semsplat {
namespace {

constexpr double kDegenerateRotationNorm = 1e-8;

}  // namespace

FdmParams FdmParams::identity(std::size_t gaussians, int channels, int basis_count) {
    if (channels < 1 || basis_count < 1) fail(ErrorCode::InvalidArgument, "FDM bank needs channels >= 1 and B >= 1");
    FdmParams p;
    p.basis_count = basis_count;
    p.channels = channels;
    p.weights.assign(gaussians * channels * basis_count, 0.0);
    p.centers.resize(basis_count);
    p.widths.assign(basis_count, 1.0 / basis_count);
    for (int j = 0; j < basis_count; ++j) {
        p.centers[j] = basis_count == 1 ? 0.5 : static_cast<double>(j) / (basis_count - 1);
    }
    return p;
}

void FdmParams::clamp_widths() {
    for (double& w : widths) {
        if (!(w > kMinWidth)) w = kMinWidth;
    }
}

void FdmParams::check_shapes(std::size_t gaussians) const {
    if (basis_count < 1 || channels < 1) fail(ErrorCode::ShapeMismatch, "FDM bank has no basis or channels");
    if (centers.size() != static_cast<std::size_t>(basis_count) || widths.size() != centers.size()) {
        fail(ErrorCode::ShapeMismatch, "FDM bank centers/widths do not match B");
    }
    if (weights.size() != gaussians * channels * basis_count) {
        fail(ErrorCode::ShapeMismatch, "FDM bank weights sized for " + std::to_string(gaussian_count()) +
                                           " Gaussians, expected " + std::to_string(gaussians));
    }
}

void fdm_basis(const FdmParams& params, double t, std::span<double> basis) {
    for (int j = 0; j < params.basis_count; ++j) {
        const double u = (t - params.centers[j]) / params.widths[j];
        basis[j] = std::exp(-0.5 * u * u);
    }
}

std::vector<double> fdm_eval(const FdmParams& params, double t) {
    const std::size_t rows = params.gaussian_count() * params.channels;
    const std::size_t b = static_cast<std::size_t>(params.basis_count);
    std::vector<double> basis(b);
    fdm_basis(params, t, basis);
    std::vector<double> out(rows);
    const auto& k = simd::kernels();
    for (std::size_t r = 0; r < rows; ++r) out[r] = k.dot(params.weights.data() + r * b, basis.data(), b);
    return out;
}

void fdm_backward(const FdmParams& params, double t, std::span<const double> upstream, FdmParams& grad) {
    const std::size_t rows = params.gaussian_count() * params.channels;
    const std::size_t b = static_cast<std::size_t>(params.basis_count);
    if (upstream.size() != rows) fail(ErrorCode::ShapeMismatch, "FDM upstream gradient has wrong length");
    std::vector<double> basis(b);
    fdm_basis(params, t, basis);

    // weighted[j] = sum over rows of upstream_r * w_rj
    std::vector<double> weighted(b, 0.0);
    const auto& k = simd::kernels();
    for (std::size_t r = 0; r < rows; ++r) {
        const double g = upstream[r];
        if (g == 0.0) continue;
        k.axpy(g, basis.data(), grad.weights.data() + r * b, b);
        k.axpy(g, params.weights.data() + r * b, weighted.data(), b);
    }
    for (std::size_t j = 0; j < b; ++j) {
        const double s = params.widths[j];
        const double dt = t - params.centers[j];
        grad.centers[j] += weighted[j] * basis[j] * dt / (s * s);
        grad.widths[j] += weighted[j] * basis[j] * dt * dt / (s * s * s);
    }
}

FdmParams fdm_backward(const FdmParams& params, double t, std::span<const double> upstream) {
    FdmParams grad = params;
    std::fill(grad.weights.begin(), grad.weights.end(), 0.0);
    std::fill(grad.centers.begin(), grad.centers.end(), 0.0);
    std::fill(grad.widths.begin(), grad.widths.end(), 0.0);
    fdm_backward(params, t, upstream, grad);
    return grad;
}

DeformationField DeformationField::identity(std::size_t gaussians, int basis_count) {
    return {FdmParams::identity(gaussians, 3, basis_count), FdmParams::identity(gaussians, 4, basis_count),
            FdmParams::identity(gaussians, 3, basis_count), FdmParams::identity(gaussians, 1, basis_count)};
}

void DeformationField::clamp_widths() {
    mean.clamp_widths();
    rotation.clamp_widths();
    scale.clamp_widths();
    feature.clamp_widths();
}

void DeformationField::check_shapes(std::size_t gaussians) const {
    mean.check_shapes(gaussians);
    rotation.check_shapes(gaussians);
    scale.check_shapes(gaussians);
    feature.check_shapes(gaussians);
    if (mean.channels != 3 || rotation.channels != 4 || scale.channels != 3 || feature.channels != 1) {
        fail(ErrorCode::ShapeMismatch, "deformation banks must have 3/4/3/1 channels");
    }
    const int b = mean.basis_count;
    if (rotation.basis_count != b || scale.basis_count != b || feature.basis_count != b) {
        fail(ErrorCode::ShapeMismatch, "deformation banks disagree on B");
    }
}

DeformedGeometry deform_gaussian(const GaussianCloud& cloud, const DeformationField& field, double t) {
    const std::size_t n = cloud.size();
    const std::vector<double> psi_mu = fdm_eval(field.mean, t);
    const std::vector<double> psi_r = fdm_eval(field.rotation, t);
    const std::vector<double> psi_s = fdm_eval(field.scale, t);

    DeformedGeometry out;
    out.means.resize(3 * n);
    out.rotations.resize(4 * n);
    out.raw_norms.resize(n);
    out.log_scales.resize(3 * n);
    for (std::size_t i = 0; i < 3 * n; ++i) {
        out.means[i] = cloud.means[i] + psi_mu[i];
        out.log_scales[i] = cloud.log_scales[i] + psi_s[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        double q[4];
        double norm2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            q[k] = cloud.rotations[4 * i + k] + psi_r[4 * i + k];
            norm2 += q[k] * q[k];
        }
        const double norm = std::sqrt(norm2);
        if (!(norm > kDegenerateRotationNorm)) {
            fail(ErrorCode::DegenerateRotation, "deformed rotation of Gaussian " + std::to_string(i) + " has norm " +
                                                    std::to_string(norm));
        }
        out.raw_norms[i] = norm;
        for (int k = 0; k < 4; ++k) out.rotations[4 * i + k] = q[k] / norm;
    }
    return out;
}

void deform_gaussian_backward(const GaussianCloud& cloud, const DeformationField& field, double t,
                              const DeformedGeometry& geometry, std::span<const double> d_means,
                              std::span<const double> d_rotations, std::span<const double> d_log_scales,
                              GaussianCloud& cloud_grad, DeformationField& field_grad) {
    const std::size_t n = cloud.size();
    for (std::size_t i = 0; i < 3 * n; ++i) {
        cloud_grad.means[i] += d_means[i];
        cloud_grad.log_scales[i] += d_log_scales[i];
    }
    std::vector<double> d_raw(4 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* q = &geometry.rotations[4 * i];
        const double* g = &d_rotations[4 * i];
        const double proj = q[0] * g[0] + q[1] * g[1] + q[2] * g[2] + q[3] * g[3];
        const double inv = 1.0 / geometry.raw_norms[i];
        for (int k = 0; k < 4; ++k) {
            d_raw[4 * i + k] = (g[k] - q[k] * proj) * inv;
            cloud_grad.rotations[4 * i + k] += d_raw[4 * i + k];
        }
    }
    fdm_backward(field.mean, t, d_means, field_grad.mean);
    fdm_backward(field.rotation, t, d_raw, field_grad.rotation);
    fdm_backward(field.scale, t, d_log_scales, field_grad.scale);
}

DeformedFeatures deform_feature(const GaussianCloud& cloud, const SemanticTracker& tracker, const FdmParams& gate,
                                double t) {
    const std::size_t n = cloud.size();
    const int d = cloud.feature_dim;
    if (tracker.feature_dim != d) {
        fail(ErrorCode::ShapeMismatch, "tracker output dimension " + std::to_string(tracker.feature_dim) +
                                           " does not match cloud feature dimension " + std::to_string(d));
    }
    const std::vector<double> psi = fdm_eval(gate, t);
    DeformedFeatures out;
    out.features.resize(n * d);
    out.beta.resize(n);
    out.tracker_out.resize(n * d);
    detail::for_each_chunk(n, 512, [&](std::size_t begin, std::size_t end, std::size_t) {
        std::vector<double> input(d + 1);
        for (std::size_t i = begin; i < end; ++i) {
            for (int k = 0; k < d; ++k) input[k] = cloud.features[i * d + k];
            input[d] = t;
            std::span<double> g(out.tracker_out.data() + i * d, static_cast<std::size_t>(d));
            tracker_forward(tracker, input, g);
            const double beta = 1.0 / (1.0 + std::exp(-tracker.slope * psi[i]));
            out.beta[i] = beta;
            for (int k = 0; k < d; ++k) out.features[i * d + k] = cloud.features[i * d + k] + g[k] * beta;
        }
    });
    return out;
}

void deform_feature_backward(const GaussianCloud& cloud, const SemanticTracker& tracker, const FdmParams& gate,
                             double t, const DeformedFeatures& deformed, std::span<const double> d_features,
                             GaussianCloud& cloud_grad, SemanticTracker& tracker_grad, FdmParams& gate_grad) {
    const std::size_t n = cloud.size();
    const int d = cloud.feature_dim;
    std::vector<double> d_psi(n, 0.0);
    constexpr std::size_t kChunk = 512;
    std::vector<SemanticTracker> partial(detail::chunk_count(n, kChunk), SemanticTracker::zeros(d));
    detail::for_each_chunk(n, kChunk, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        std::vector<double> input(d + 1), d_input(d + 1), d_g(d);
        SemanticTracker& tg = partial[chunk];
        for (std::size_t i = begin; i < end; ++i) {
            const double beta = deformed.beta[i];
            double d_beta = 0.0;
            bool any = false;
            for (int k = 0; k < d; ++k) {
                const double u = d_features[i * d + k];
                any = any || u != 0.0;
                cloud_grad.features[i * d + k] += u;
                d_beta += u * deformed.tracker_out[i * d + k];
                d_g[k] = u * beta;
            }
            if (!any) continue;
            d_psi[i] = d_beta * tracker.slope * beta * (1.0 - beta);
            for (int k = 0; k < d; ++k) input[k] = cloud.features[i * d + k];
            input[d] = t;
            tracker_backward(tracker, input, d_g, tg, d_input);
            for (int k = 0; k < d; ++k) cloud_grad.features[i * d + k] += d_input[k];
        }
    });
    auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    };
    for (const SemanticTracker& p : partial) {
        add(tracker_grad.conv1_weights, p.conv1_weights);
        add(tracker_grad.conv1_bias, p.conv1_bias);
        add(tracker_grad.conv2_weights, p.conv2_weights);
        add(tracker_grad.conv2_bias, p.conv2_bias);
        add(tracker_grad.head_weights, p.head_weights);
        add(tracker_grad.head_bias, p.head_bias);
    }
    fdm_backward(gate, t, d_psi, gate_grad);
}

}  // namespace semsplat
