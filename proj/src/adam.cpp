// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/adam.hpp"

#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat {

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments, std::int64_t step,
               double lr, const AdamConfig& config) {
    if (params.size() != grads.size() || moments.m.size() != params.size() || moments.v.size() != params.size()) {
        fail(ErrorCode::ShapeMismatch, "adam: parameter, gradient and moment sizes differ");
    }
    if (step < 1) fail(ErrorCode::InvalidArgument, "adam: step must be >= 1");
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    double* m = moments.m.data();
    double* v = moments.v.data();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        if (lr == 0.0) continue;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + config.eps);
    }
}

AdamOptimizer::AdamOptimizer(const std::vector<std::size_t>& sizes, AdamConfig config) : config_(config) {
    moments_.reserve(sizes.size());
    for (std::size_t n : sizes) moments_.emplace_back(n);
}

void AdamOptimizer::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
                         double lr, std::span<const double> multipliers) {
    if (params.size() != moments_.size() || grads.size() != moments_.size()) {
        fail(ErrorCode::ShapeMismatch, "adam: group count mismatch");
    }
    ++steps_;
    for (std::size_t g = 0; g < params.size(); ++g) {
        const double mult = g < multipliers.size() ? multipliers[g] : 1.0;
        adam_step(params[g], grads[g], moments_[g], steps_, lr * mult, config_);
    }
}

}  // namespace semsplat
