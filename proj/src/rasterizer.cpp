// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/rasterizer.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "parallel.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/simd.hpp"

namespace semsplat {
namespace {

struct Conic {
    double xx, xy, yy;
};

Conic conic_of(const Vec3& cov) {
    const double det = cov[0] * cov[2] - cov[1] * cov[1];
    const double inv = 1.0 / det;
    return {cov[2] * inv, -cov[1] * inv, cov[0] * inv};
}

// Maps d(loss)/d(conic) to d(loss)/d(cov2d) for cov = [[a,b],[b,c]].
Vec3 conic_to_cov_gradient(const Vec3& cov, const Vec3& d_conic) {
    const double a = cov[0], b = cov[1], c = cov[2];
    const double det = a * c - b * b;
    const double det2 = det * det;
    const double ga = d_conic[0], gb = d_conic[1], gc = d_conic[2];
    Vec3 out;
    out[0] = ga * (-c * c / det2) + gb * (b * c / det2) + gc * (-b * b / det2);
    out[1] = ga * (2.0 * b * c / det2) + gb * (-(det + 2.0 * b * b) / det2) + gc * (2.0 * a * b / det2);
    out[2] = ga * (-b * b / det2) + gb * (a * b / det2) + gc * (-a * a / det2);
    return out;
}

double background_feature(const RasterSettings& settings, int k) {
    return settings.background_feature.empty() ? 0.0 : settings.background_feature[k];
}

void check_background(const RasterSettings& settings, int feature_dim) {
    if (!settings.background_feature.empty() &&
        settings.background_feature.size() != static_cast<std::size_t>(feature_dim)) {
        fail(ErrorCode::ShapeMismatch, "background feature length does not match feature dimension");
    }
}

}  // namespace

RenderOutput RenderOutput::zeros(int width, int height, int feature_dim) {
    RenderOutput out;
    out.width = width;
    out.height = height;
    out.feature_dim = feature_dim;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    out.color.assign(3 * n, 0.0);
    out.depth.assign(n, 0.0);
    out.feature.assign(n * feature_dim, 0.0);
    out.accum_alpha.assign(n, 0.0);
    return out;
}

RenderGradient RenderGradient::zeros(int width, int height, int feature_dim) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    RenderGradient g;
    g.color.assign(3 * n, 0.0);
    g.depth.assign(n, 0.0);
    g.feature.assign(n * feature_dim, 0.0);
    return g;
}

SplatGradients SplatGradients::zeros(std::size_t count, int feature_dim) {
    SplatGradients g;
    g.feature_dim = feature_dim;
    g.center.assign(count, Vec2::Zero());
    g.cov2d.assign(count, Vec3::Zero());
    g.view_depth.assign(count, 0.0);
    g.rgb.assign(count, Vec3::Zero());
    g.alpha_base.assign(count, 0.0);
    g.features.assign(count * feature_dim, 0.0);
    return g;
}

std::vector<std::uint32_t> depth_order(const SplatSet& splats) {
    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const Splat2D& sa = splats.splats[a];
        const Splat2D& sb = splats.splats[b];
        if (sa.view_depth != sb.view_depth) return sa.view_depth < sb.view_depth;
        return sa.source_index < sb.source_index;
    });
    return order;
}

RenderOutput rasterize_forward(const SplatSet& splats, int width, int height, const RasterSettings& settings,
                               RasterTrace* trace) {
    const int d = splats.feature_dim;
    check_background(settings, d);
    const int ts = settings.tile_size;
    const int tiles_x = (width + ts - 1) / ts;
    const int tiles_y = (height + ts - 1) / ts;
    const std::size_t tile_count = static_cast<std::size_t>(tiles_x) * tiles_y;

    // Bin splats into tiles in global depth order so each tile list is sorted.
    const std::vector<std::uint32_t> order = depth_order(splats);
    std::vector<Footprint> footprints(splats.size());
    std::vector<std::uint32_t> counts(tile_count + 1, 0);
    for (std::size_t i = 0; i < splats.size(); ++i) {
        footprints[i] = splat_footprint(splats.splats[i], settings, width, height);
        const Footprint& f = footprints[i];
        if (f.empty()) continue;
        for (int ty = f.min_y / ts; ty <= f.max_y / ts; ++ty) {
            for (int tx = f.min_x / ts; tx <= f.max_x / ts; ++tx) ++counts[static_cast<std::size_t>(ty) * tiles_x + tx + 1];
        }
    }
    std::vector<std::uint32_t> offsets(tile_count + 1, 0);
    for (std::size_t t = 0; t < tile_count; ++t) offsets[t + 1] = offsets[t] + counts[t + 1];
    std::vector<std::uint32_t> tile_splats(offsets.back());
    {
        std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::uint32_t i : order) {
            const Footprint& f = footprints[i];
            if (f.empty()) continue;
            for (int ty = f.min_y / ts; ty <= f.max_y / ts; ++ty) {
                for (int tx = f.min_x / ts; tx <= f.max_x / ts; ++tx) {
                    tile_splats[cursor[static_cast<std::size_t>(ty) * tiles_x + tx]++] = i;
                }
            }
        }
    }

    RenderOutput out = RenderOutput::zeros(width, height, d);
    std::vector<double> transmittance(out.pixel_count(), 1.0);
    if (trace) {
        trace->width = width;
        trace->height = height;
        trace->tiles_x = tiles_x;
        trace->tiles_y = tiles_y;
        trace->tile_size = ts;
        trace->pixels.resize(out.pixel_count());
        for (auto& p : trace->pixels) p.clear();
    }

    std::vector<Conic> conics(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) conics[i] = conic_of(splats.splats[i].cov2d);

    const simd::KernelTable& kernels = simd::kernels();
    detail::for_each_chunk(tile_count, 1, [&](std::size_t tile, std::size_t, std::size_t) {
        const int tx = static_cast<int>(tile % tiles_x);
        const int ty = static_cast<int>(tile / tiles_x);
        const int x_begin = tx * ts;
        const int x_end = std::min(width, x_begin + ts);
        const int y_begin = ty * ts;
        const int y_end = std::min(height, y_begin + ts);
        std::array<double, 64> alpha{}, gauss{};
        std::vector<double> alpha_buf, gauss_buf;
        double* a_ptr = alpha.data();
        double* g_ptr = gauss.data();
        if (ts > 64) {
            alpha_buf.resize(ts);
            gauss_buf.resize(ts);
            a_ptr = alpha_buf.data();
            g_ptr = gauss_buf.data();
        }

        for (int y = y_begin; y < y_end; ++y) {
            for (std::uint32_t slot = 0; slot < offsets[tile + 1] - offsets[tile]; ++slot) {
                const std::uint32_t idx = tile_splats[offsets[tile] + slot];
                const Footprint& f = footprints[idx];
                if (y < f.min_y || y > f.max_y) continue;
                const int span_begin = std::max(x_begin, f.min_x);
                const int span_end = std::min(x_end - 1, f.max_x);
                if (span_begin > span_end) continue;
                const Splat2D& s = splats.splats[idx];
                const Conic& c = conics[idx];
                simd::SplatRow row;
                row.conic_xx = c.xx;
                row.conic_xy = c.xy;
                row.conic_yy = c.yy;
                row.center_x = s.center.x();
                row.center_y = s.center.y();
                row.opacity = s.alpha_base;
                row.y = y;
                row.x0 = span_begin;
                row.rect_min_x = f.min_x;
                row.rect_max_x = f.max_x;
                row.alpha_min = settings.alpha_min;
                row.alpha_max = settings.alpha_max;
                const std::size_t n = static_cast<std::size_t>(span_end - span_begin + 1);
                kernels.splat_row(row, a_ptr, g_ptr, n);
                const double* feat = splats.features.data() + static_cast<std::size_t>(idx) * d;
                for (std::size_t k = 0; k < n; ++k) {
                    const double a = a_ptr[k];
                    if (a <= 0.0) continue;
                    const std::size_t pix = static_cast<std::size_t>(y) * width + span_begin + k;
                    const double w = a * transmittance[pix];
                    double* col = &out.color[3 * pix];
                    col[0] += w * s.rgb[0];
                    col[1] += w * s.rgb[1];
                    col[2] += w * s.rgb[2];
                    out.depth[pix] += w * s.view_depth;
                    double* fo = &out.feature[pix * d];
                    for (int j = 0; j < d; ++j) fo[j] += w * feat[j];
                    transmittance[pix] *= 1.0 - a;
                    if (trace) trace->pixels[pix].push_back({slot, a, g_ptr[k]});
                }
            }
        }
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = x_begin; x < x_end; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                const double t = transmittance[pix];
                for (int c = 0; c < 3; ++c) out.color[3 * pix + c] += t * settings.background_color[c];
                for (int j = 0; j < d; ++j) out.feature[pix * d + j] += t * background_feature(settings, j);
                out.accum_alpha[pix] = 1.0 - t;
            }
        }
    });

    if (trace) {
        trace->tile_offsets = std::move(offsets);
        trace->tile_splats = std::move(tile_splats);
        trace->final_transmittance = std::move(transmittance);
    }
    return out;
}

SplatGradients rasterize_backward(const SplatSet& splats, const RasterSettings& settings, const RasterTrace& trace,
                                  const RenderGradient& upstream) {
    const int d = splats.feature_dim;
    const int width = trace.width;
    const int ts = trace.tile_size;
    const std::size_t tile_count = static_cast<std::size_t>(trace.tiles_x) * trace.tiles_y;
    const std::size_t stride = 10 + static_cast<std::size_t>(d);  // center2 conic3 depth rgb3 base feat[d]

    std::vector<double> slots(static_cast<std::size_t>(trace.tile_offsets.back()) * stride, 0.0);
    std::vector<Conic> conics(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) conics[i] = conic_of(splats.splats[i].cov2d);

    detail::for_each_chunk(tile_count, 1, [&](std::size_t tile, std::size_t, std::size_t) {
        const int tx = static_cast<int>(tile % trace.tiles_x);
        const int ty = static_cast<int>(tile / trace.tiles_x);
        const int x_begin = tx * ts;
        const int x_end = std::min(width, x_begin + ts);
        const int y_begin = ty * ts;
        const int y_end = std::min(trace.height, y_begin + ts);
        double* tile_grad = slots.data() + static_cast<std::size_t>(trace.tile_offsets[tile]) * stride;
        std::vector<double> trans;

        for (int y = y_begin; y < y_end; ++y) {
            for (int x = x_begin; x < x_end; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                const auto& contribs = trace.pixels[pix];
                if (contribs.empty()) continue;
                const double* g_col = &upstream.color[3 * pix];
                const double g_depth = upstream.depth[pix];
                const double* g_feat = &upstream.feature[pix * d];

                trans.resize(contribs.size());
                double t = 1.0;
                for (std::size_t k = 0; k < contribs.size(); ++k) {
                    trans[k] = t;
                    t *= 1.0 - contribs[k].alpha;
                }
                double bg = 0.0;
                for (int c = 0; c < 3; ++c) bg += g_col[c] * settings.background_color[c];
                for (int j = 0; j < d; ++j) bg += g_feat[j] * background_feature(settings, j);
                double after = trace.final_transmittance[pix] * bg;

                for (std::size_t k = contribs.size(); k-- > 0;) {
                    const auto& ct = contribs[k];
                    const std::uint32_t idx = trace.tile_splats[trace.tile_offsets[tile] + ct.slot];
                    const Splat2D& s = splats.splats[idx];
                    const double* feat = splats.features.data() + static_cast<std::size_t>(idx) * d;
                    double* g = tile_grad + static_cast<std::size_t>(ct.slot) * stride;

                    double value = g_col[0] * s.rgb[0] + g_col[1] * s.rgb[1] + g_col[2] * s.rgb[2] +
                                   g_depth * s.view_depth;
                    for (int j = 0; j < d; ++j) value += g_feat[j] * feat[j];

                    const double w = ct.alpha * trans[k];
                    g[5] += w * g_depth;
                    g[6] += w * g_col[0];
                    g[7] += w * g_col[1];
                    g[8] += w * g_col[2];
                    for (int j = 0; j < d; ++j) g[10 + j] += w * g_feat[j];

                    const double d_alpha = trans[k] * value - after / (1.0 - ct.alpha);
                    after += w * value;
                    if (ct.alpha >= settings.alpha_max) continue;  // clamped: no gradient

                    g[9] += d_alpha * ct.gauss;
                    const double d_power = d_alpha * ct.alpha;
                    const Conic& c = conics[idx];
                    const double dx = x - s.center.x();
                    const double dy = y - s.center.y();
                    g[0] += d_power * (c.xx * dx + c.xy * dy);
                    g[1] += d_power * (c.yy * dy + c.xy * dx);
                    g[2] += d_power * (-0.5 * dx * dx);
                    g[3] += d_power * (-dx * dy);
                    g[4] += d_power * (-0.5 * dy * dy);
                }
            }
        }
    });

    SplatGradients out = SplatGradients::zeros(splats.size(), d);
    std::vector<Vec3> d_conic(splats.size(), Vec3::Zero());
    for (std::size_t tile = 0; tile < tile_count; ++tile) {
        for (std::uint32_t p = trace.tile_offsets[tile]; p < trace.tile_offsets[tile + 1]; ++p) {
            const std::uint32_t idx = trace.tile_splats[p];
            const double* g = slots.data() + static_cast<std::size_t>(p) * stride;
            out.center[idx] += Vec2(g[0], g[1]);
            d_conic[idx] += Vec3(g[2], g[3], g[4]);
            out.view_depth[idx] += g[5];
            out.rgb[idx] += Vec3(g[6], g[7], g[8]);
            out.alpha_base[idx] += g[9];
            for (int j = 0; j < d; ++j) out.features[static_cast<std::size_t>(idx) * d + j] += g[10 + j];
        }
    }
    for (std::size_t i = 0; i < splats.size(); ++i) out.cov2d[i] = conic_to_cov_gradient(splats.splats[i].cov2d, d_conic[i]);
    return out;
}

RenderOutput rasterize_oracle(const SplatSet& splats, int width, int height, const RasterSettings& settings) {
    const int d = splats.feature_dim;
    check_background(settings, d);
    const std::vector<std::uint32_t> order = depth_order(splats);
    RenderOutput out = RenderOutput::zeros(width, height, d);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * width + x;
            double t = 1.0;
            for (std::uint32_t idx : order) {
                const Splat2D& s = splats.splats[idx];
                const Footprint f = splat_footprint(s, settings, width, height);
                if (x < f.min_x || x > f.max_x || y < f.min_y || y > f.max_y) continue;
                const Conic c = conic_of(s.cov2d);
                const double dx = x - s.center.x();
                const double dy = y - s.center.y();
                const double power = -0.5 * (c.xx * dx * dx + c.yy * dy * dy) - c.xy * dx * dy;
                const double a_raw = s.alpha_base * std::exp(power);
                if (a_raw < settings.alpha_min) continue;
                const double a = std::min(a_raw, settings.alpha_max);
                const double w = a * t;
                for (int k = 0; k < 3; ++k) out.color[3 * pix + k] += w * s.rgb[k];
                out.depth[pix] += w * s.view_depth;
                for (int j = 0; j < d; ++j) out.feature[pix * d + j] += w * splats.features[idx * d + j];
                t *= 1.0 - a;
            }
            for (int k = 0; k < 3; ++k) out.color[3 * pix + k] += t * settings.background_color[k];
            for (int j = 0; j < d; ++j) out.feature[pix * d + j] += t * background_feature(settings, j);
            out.accum_alpha[pix] = 1.0 - t;
        }
    }
    return out;
}

}  // namespace semsplat
