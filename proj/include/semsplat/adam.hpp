// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace semsplat {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// First and second moment buffers for one parameter array.
struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update; `step` is 1-based.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments, std::int64_t step,
               double lr, const AdamConfig& config);

/// Moments for a fixed list of parameter arrays sharing one step counter.
class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(const std::vector<std::size_t>& sizes, AdamConfig config);

    /// Advances the step counter, then updates every group with lr * multiplier[g].
    void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
              double lr, std::span<const double> multipliers);

    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t s) { steps_ = s; }
    std::vector<AdamMoments>& moments() { return moments_; }
    const std::vector<AdamMoments>& moments() const { return moments_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<AdamMoments> moments_;
    std::int64_t steps_ = 0;
};

}  // namespace semsplat
