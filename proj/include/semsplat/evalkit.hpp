// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semsplat/query.hpp"

namespace semsplat {

struct Dataset;

constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) for [0,1] images; kPsnrIdentical when MSE == 0.
double psnr(std::span<const double> image, std::span<const double> reference);
/// PSNR of a float render after 8-bit quantization against an 8-bit reference.
double psnr_quantized(std::span<const double> render, std::span<const std::uint8_t> reference);

/// Intersection and union counts pooled over any number of frames.
class IoUAccumulator {
public:
    explicit IoUAccumulator(std::size_t classes) : inter_(classes, 0), uni_(classes, 0) {}

    void add(std::size_t cls, std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

    std::size_t classes() const { return inter_.size(); }
    std::uint64_t intersection(std::size_t cls) const { return inter_.at(cls); }
    std::uint64_t union_count(std::size_t cls) const { return uni_.at(cls); }

private:
    std::vector<std::uint64_t> inter_;
    std::vector<std::uint64_t> uni_;
};

struct IoUReport {
    std::vector<std::optional<double>> per_class;  // percent; nullopt = empty union, excluded
    double mean = 0.0;                             // over non-excluded classes
    std::vector<std::size_t> excluded;
};

IoUReport iou_report(const IoUAccumulator& acc);
/// One mask pair per class.
IoUReport miou(const std::vector<std::vector<std::uint8_t>>& pred, const std::vector<std::vector<std::uint8_t>>& gt);

struct LatencyStats {
    std::vector<double> samples_ms;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double mean_ms = 0.0;
    double fps = 0.0;  // 1000 / median
};

/// Median (mean of the middle pair for even counts) and nearest-rank p95.
LatencyStats latency_stats(std::vector<double> samples_ms);

/// Milliseconds from an arbitrary epoch; injectable for tests.
using Clock = std::function<double()>;
Clock steady_clock_ms();

/// Times `repeats` full queries per prompt after `warmup` untimed runs.
LatencyStats bench_query(const QueryEngine& engine, const std::vector<QueryRequest>& requests, int repeats,
                         int warmup = 1, const Clock& clock = steady_clock_ms());

struct ResolutionBench {
    int width = 0;
    int height = 0;
    LatencyStats stats;
};

/// bench_query at several render resolutions (camera intrinsics rescaled).
std::vector<ResolutionBench> bench_resolutions(const QueryEngine& engine, const QueryRequest& request,
                                               const std::vector<std::pair<int, int>>& sizes, int repeats,
                                               int warmup = 1, const Clock& clock = steady_clock_ms());

struct EvalReport {
    std::vector<std::string> class_names;
    IoUReport iou;
    std::vector<std::size_t> frames;
    std::vector<double> psnr_per_frame;
    double psnr_mean = 0.0;
    std::optional<LatencyStats> latency;
    double threshold = kDefaultThreshold;
    std::string config_echo;

    std::string to_json() const;
    std::string to_table() const;
};

/// Queries every class prompt on `frames` and renders them for PSNR. Class k
/// of the manifest is ground-truth label k+1.
EvalReport evaluate(const QueryEngine& engine, const Dataset& dataset, const std::vector<std::size_t>& frames,
                    double threshold = kDefaultThreshold);

}  // namespace semsplat
