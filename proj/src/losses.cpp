// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        fail(ErrorCode::InvalidArgument,
             std::string(what) + ": expected " + std::to_string(want) + " values, got " + std::to_string(got));
    }
}

void add_scaled(std::vector<double>& dst, const std::vector<double>& src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda >= 0.0)) fail(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (region_min_pixels < 1) fail(ErrorCode::InvalidArgument, "region_min_pixels must be >= 1");
    if (!(depth_epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "depth_epsilon must be > 0");
}

int scaled_region_min_pixels(int width, int height) {
    const double scaled = 1000.0 * static_cast<double>(width) * height / (854.0 * 480.0);
    return std::max(16, static_cast<int>(std::lround(scaled)));
}

LossValue l1_loss(std::span<const double> pred, std::span<const double> target) {
    require_size(target.size(), pred.size(), "l1_loss");
    LossValue out;
    out.grad.assign(pred.size(), 0.0);
    if (pred.empty()) return out;
    const double inv = 1.0 / static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred[i] - target[i];
        sum += std::abs(diff);
        out.grad[i] = sign(diff) * inv;
    }
    out.value = sum * inv;
    return out;
}

LossValue inverse_depth_loss(std::span<const double> pred, std::span<const double> target, double epsilon) {
    require_size(target.size(), pred.size(), "inverse_depth_loss");
    if (!(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "inverse_depth_loss: epsilon must be > 0");
    LossValue out;
    out.grad.assign(pred.size(), 0.0);
    std::size_t valid = 0;
    for (double t : target) valid += t > 0.0 ? 1 : 0;
    if (valid == 0) return out;
    const double inv = 1.0 / static_cast<double>(valid);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!(target[i] > 0.0)) continue;
        const bool clamped = !(pred[i] > epsilon);
        const double d = clamped ? epsilon : pred[i];
        const double r = 1.0 / target[i] - 1.0 / d;
        sum += std::abs(r);
        if (!clamped) out.grad[i] = sign(r) * inv / (d * d);
    }
    out.value = sum * inv;
    return out;
}

LossValue tv_loss(std::span<const double> map, int width, int height, int channels) {
    require_size(map.size(), static_cast<std::size_t>(width) * height * channels, "tv_loss");
    if (width < 2 || height < 2) fail(ErrorCode::InvalidArgument, "tv_loss: map must be at least 2x2");
    LossValue out;
    out.grad.assign(map.size(), 0.0);
    const double inv_v = 1.0 / (static_cast<double>(height - 1) * width);
    const double inv_h = 1.0 / (static_cast<double>(width - 1) * height);
    const std::size_t row = static_cast<std::size_t>(width) * channels;
    double sum_v = 0.0;
    double sum_h = 0.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * width + x) * channels;
            for (int c = 0; c < channels; ++c) {
                const std::size_t i = base + c;
                if (y + 1 < height) {
                    const double diff = map[i + row] - map[i];
                    sum_v += std::abs(diff);
                    const double g = sign(diff) * inv_v;
                    out.grad[i + row] += g;
                    out.grad[i] -= g;
                }
                if (x + 1 < width) {
                    const double diff = map[i + channels] - map[i];
                    sum_h += std::abs(diff);
                    const double g = sign(diff) * inv_h;
                    out.grad[i + channels] += g;
                    out.grad[i] -= g;
                }
            }
        }
    }
    out.value = sum_v * inv_v + sum_h * inv_h;
    return out;
}

LossValue region_smoothness_loss(std::span<const double> feature, std::span<const std::uint16_t> labels, int width,
                                 int height, int channels, int min_pixels) {
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    require_size(feature.size(), pixels * channels, "region_smoothness_loss");
    require_size(labels.size(), pixels, "region_smoothness_loss labels");
    LossValue out;
    out.grad.assign(feature.size(), 0.0);

    std::map<std::uint16_t, std::size_t> counts;
    for (std::uint16_t l : labels) {
        if (l != 0) ++counts[l];
    }
    // Qualifying regions get dense ids; means and sign sums per id.
    std::map<std::uint16_t, std::size_t> slot;
    std::size_t contributing = 0;
    for (const auto& [label, count] : counts) {
        if (count > static_cast<std::size_t>(min_pixels)) {
            const std::size_t id = slot.size();
            slot[label] = id;
            contributing += count;
        }
    }
    if (slot.empty()) return out;

    const std::size_t regions = slot.size();
    std::vector<std::ptrdiff_t> region_of(pixels, -1);
    std::vector<double> size(regions, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
        auto it = labels[p] != 0 ? slot.find(labels[p]) : slot.end();
        if (it == slot.end()) continue;
        region_of[p] = static_cast<std::ptrdiff_t>(it->second);
        size[it->second] += 1.0;
    }
    std::vector<double> mean(regions * channels, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
        if (region_of[p] < 0) continue;
        for (int c = 0; c < channels; ++c) mean[region_of[p] * channels + c] += feature[p * channels + c];
    }
    for (std::size_t r = 0; r < regions; ++r) {
        for (int c = 0; c < channels; ++c) mean[r * channels + c] /= size[r];
    }

    const double inv = 1.0 / (static_cast<double>(contributing) * channels);
    std::vector<double> sign_sum(regions * channels, 0.0);
    double sum = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
        if (region_of[p] < 0) continue;
        for (int c = 0; c < channels; ++c) {
            const std::size_t rc = region_of[p] * channels + c;
            const double diff = feature[p * channels + c] - mean[rc];
            sum += std::abs(diff);
            const double s = sign(diff);
            out.grad[p * channels + c] = s * inv;
            sign_sum[rc] += s;
        }
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        if (region_of[p] < 0) continue;
        for (int c = 0; c < channels; ++c) {
            const std::size_t rc = region_of[p] * channels + c;
            out.grad[p * channels + c] -= sign_sum[rc] * inv / size[region_of[p]];
        }
    }
    out.value = sum * inv;
    return out;
}

std::vector<std::uint16_t> derive_region_labels(std::span<const float> feature, int width, int height, int channels,
                                                double quantum) {
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    require_size(feature.size(), pixels * channels, "derive_region_labels");
    if (!(quantum > 0.0)) fail(ErrorCode::InvalidArgument, "derive_region_labels: quantum must be > 0");
    std::vector<long long> key(pixels * channels);
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = std::llround(feature[i] / quantum);
    auto same = [&](std::size_t a, std::size_t b) {
        return std::equal(key.begin() + a * channels, key.begin() + (a + 1) * channels, key.begin() + b * channels);
    };
    std::vector<std::uint16_t> labels(pixels, 0);
    std::vector<std::size_t> stack;
    std::uint32_t next = 1;
    for (std::size_t seed = 0; seed < pixels; ++seed) {
        if (labels[seed] != 0) continue;
        // Ids saturate at the u16 limit; later regions share the last id.
        const auto id = static_cast<std::uint16_t>(std::min<std::uint32_t>(next++, 65535));
        labels[seed] = id;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(p % width);
            const int y = static_cast<int>(p / width);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || ny[k] < 0 || nx[k] >= width || ny[k] >= height) continue;
                const std::size_t q = static_cast<std::size_t>(ny[k]) * width + nx[k];
                if (labels[q] == 0 && same(p, q)) {
                    labels[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }
    return labels;
}

LossTargets LossTargets::from_frame(const FrameSample& frame) {
    LossTargets t;
    t.width = frame.width;
    t.height = frame.height;
    t.feature_dim = frame.feature_dim;
    t.color.resize(frame.color.size());
    for (std::size_t i = 0; i < frame.color.size(); ++i) t.color[i] = frame.color[i] / 255.0;
    t.depth.assign(frame.depth.begin(), frame.depth.end());
    t.feature.assign(frame.features.begin(), frame.features.end());
    if (!frame.labels.empty()) {
        t.labels = frame.labels;
    } else {
        t.labels = derive_region_labels(frame.features, frame.width, frame.height, frame.feature_dim);
    }
    return t;
}

LossBreakdown total_loss(const RenderOutput& render, const LossTargets& targets, const LossWeights& weights,
                         RenderGradient* grad) {
    weights.validate();
    if (render.width != targets.width || render.height != targets.height) {
        fail(ErrorCode::InvalidArgument, "total_loss: render and target sizes differ");
    }
    if (render.feature_dim != targets.feature_dim) {
        fail(ErrorCode::InvalidArgument, "total_loss: render and target feature dimensions differ");
    }
    const int w = render.width;
    const int h = render.height;
    const int d = render.feature_dim;
    const double lam = weights.lambda;

    const LossValue color = l1_loss(render.color, targets.color);
    const LossValue depth = inverse_depth_loss(render.depth, targets.depth, weights.depth_epsilon);
    const LossValue feature = l1_loss(render.feature, targets.feature);
    const LossValue tv_c = tv_loss(render.color, w, h, 3);
    const LossValue tv_d = tv_loss(render.depth, w, h, 1);
    LossValue tv_f;
    LossValue region;
    if (d > 0) {
        tv_f = tv_loss(render.feature, w, h, d);
        if (weights.region_smoothness) {
            region = region_smoothness_loss(render.feature, targets.labels, w, h, d, weights.region_min_pixels);
        }
    }

    LossBreakdown b;
    b.color = color.value;
    b.depth = depth.value;
    b.feature = feature.value;
    b.tv_color = tv_c.value;
    b.tv_depth = tv_d.value;
    b.tv_feature = tv_f.value;
    b.region = region.value;
    b.total = b.color + b.depth + b.feature + lam * (b.tv_color + b.tv_depth + b.tv_feature + b.region);

    if (grad) {
        *grad = RenderGradient::zeros(w, h, d);
        add_scaled(grad->color, color.grad, 1.0);
        add_scaled(grad->color, tv_c.grad, lam);
        add_scaled(grad->depth, depth.grad, 1.0);
        add_scaled(grad->depth, tv_d.grad, lam);
        if (d > 0) {
            add_scaled(grad->feature, feature.grad, 1.0);
            add_scaled(grad->feature, tv_f.grad, lam);
            if (!region.grad.empty()) add_scaled(grad->feature, region.grad, lam);
        }
    }
    return b;
}

}  // namespace semsplat
