// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semsplat {

/// |a - n| / max(|a|, |n|, 1e-6)
double gradcheck_relative_error(double analytic, double numeric);

struct GradCheckOptions {
    std::uint64_t seed = 0;
    int configs = 100;
    int samples_per_array = 8;  // cap on checked entries per parameter array
};

/// Outcome of one suite. A sample is rejected (not compared) when the
/// central difference straddles a kink: some ReLU, clamp or depth-order
/// pattern differs between x - h and x + h.
struct GradCheckSummary {
    std::string name;
    int configs = 0;
    std::size_t samples = 0;
    std::size_t rejected = 0;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    double step = 0.0;

    bool passed() const;
};

GradCheckSummary gradcheck_fdm(const GradCheckOptions& options);
GradCheckSummary gradcheck_tracker(const GradCheckOptions& options);
GradCheckSummary gradcheck_rasterizer(const GradCheckOptions& options);
GradCheckSummary gradcheck_full_chain(const GradCheckOptions& options);
GradCheckSummary gradcheck_codec(const GradCheckOptions& options);
GradCheckSummary gradcheck_losses(const GradCheckOptions& options);

std::vector<GradCheckSummary> gradcheck_all(const GradCheckOptions& options);

}  // namespace semsplat
