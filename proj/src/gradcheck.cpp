// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "semsplat/deformation.hpp"
#include "semsplat/feature_codec.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {
namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

void fill_uniform(std::vector<double>& v, Rng& rng, double lo, double hi) {
    for (double& x : v) x = uniform(rng, lo, hi);
}

double weighted_sum(const std::vector<double>& a, const std::vector<double>& w) {
    return std::inner_product(a.begin(), a.end(), w.begin(), 0.0);
}

// Indices to check in an array of size n: all of them up to `cap`, else a random subset.
std::vector<std::size_t> pick(std::size_t n, int cap, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n > static_cast<std::size_t>(cap)) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(cap));
    }
    return idx;
}

struct Checker {
    GradCheckSummary& summary;
    double step;

    // Central difference of f in x; `pattern` returns the kink signature of the current state.
    void check(double& x, double analytic, const std::function<double()>& f,
               const std::function<std::vector<std::uint8_t>()>& pattern = {}) {
        const double x0 = x;
        x = x0 + step;
        const double fp = f();
        std::vector<std::uint8_t> pp;
        if (pattern) pp = pattern();
        x = x0 - step;
        const double fm = f();
        std::vector<std::uint8_t> pm;
        if (pattern) pm = pattern();
        x = x0;
        ++summary.samples;
        if (pattern && pp != pm) {
            ++summary.rejected;
            return;
        }
        const double numeric = (fp - fm) / (2.0 * step);
        summary.max_rel_error = std::max(summary.max_rel_error, gradcheck_relative_error(analytic, numeric));
    }
};

GradCheckSummary make_summary(const char* name, double tol, double step, int configs) {
    GradCheckSummary s;
    s.name = name;
    s.tolerance = tol;
    s.step = step;
    s.configs = configs;
    return s;
}

FdmParams random_bank(std::size_t n, int channels, int b, Rng& rng, double weight_scale) {
    FdmParams p = FdmParams::identity(n, channels, b);
    fill_uniform(p.weights, rng, -weight_scale, weight_scale);
    fill_uniform(p.centers, rng, 0.0, 1.0);
    fill_uniform(p.widths, rng, 0.15, 0.5);
    return p;
}

SemanticTracker random_tracker(int d, Rng& rng) {
    SemanticTracker t = SemanticTracker::initialized(d, rng());
    fill_uniform(t.conv1_bias, rng, -0.2, 0.2);
    fill_uniform(t.conv2_bias, rng, -0.2, 0.2);
    fill_uniform(t.head_weights, rng, -0.3, 0.3);
    fill_uniform(t.head_bias, rng, -0.2, 0.2);
    return t;
}

// Signs of every tracker pre-activation for every Gaussian.
std::vector<std::uint8_t> tracker_pattern(const SemanticTracker& tracker, const GaussianCloud& cloud, double t) {
    const int d = cloud.feature_dim;
    std::vector<double> input(static_cast<std::size_t>(d) + 1), out(static_cast<std::size_t>(d));
    std::vector<std::uint8_t> bits;
    TrackerActivations act;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::copy_n(cloud.features.data() + i * d, d, input.begin());
        input[d] = t;
        tracker_forward(tracker, input, out, &act);
        for (double v : act.pre1) bits.push_back(v > 0.0);
        for (double v : act.pre2) bits.push_back(v > 0.0);
    }
    return bits;
}

}  // namespace

double gradcheck_relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

bool GradCheckSummary::passed() const {
    // A suite that rejects most of its samples proves nothing.
    return samples > 0 && max_rel_error < tolerance && rejected * 10 <= samples;
}

GradCheckSummary gradcheck_fdm(const GradCheckOptions& opt) {
    GradCheckSummary s = make_summary("fdm", 1e-4, 1e-5, opt.configs);
    Checker c{s, s.step};
    Rng rng(opt.seed ^ 0xF0F0u);
    for (int k = 0; k < opt.configs; ++k) {
        const std::size_t n = 2;
        const int channels = 3;
        const int b = 4;
        FdmParams p = random_bank(n, channels, b, rng, 1.0);
        const double t = uniform(rng, 0.0, 1.0);
        std::vector<double> up(n * channels);
        fill_uniform(up, rng, -1.0, 1.0);
        const FdmParams g = fdm_backward(p, t, up);
        auto f = [&] { return weighted_sum(fdm_eval(p, t), up); };
        for (std::size_t i = 0; i < p.weights.size(); ++i) c.check(p.weights[i], g.weights[i], f);
        for (int j = 0; j < b; ++j) {
            c.check(p.centers[j], g.centers[j], f);
            c.check(p.widths[j], g.widths[j], f);
        }
    }
    return s;
}

GradCheckSummary gradcheck_tracker(const GradCheckOptions& opt) {
    GradCheckSummary s = make_summary("tracker", 1e-4, 1e-5, opt.configs);
    Checker c{s, s.step};
    Rng rng(opt.seed ^ 0x7A7Au);
    for (int k = 0; k < opt.configs; ++k) {
        const int d = 3;
        const std::size_t n = 3;
        GaussianCloud cloud = GaussianCloud::zeros(n, 0, d);
        fill_uniform(cloud.features, rng, -1.0, 1.0);
        SemanticTracker tracker = random_tracker(d, rng);
        FdmParams gate = random_bank(n, 1, 4, rng, 1.0);
        const double t = uniform(rng, 0.0, 1.0);
        std::vector<double> up(n * d);
        fill_uniform(up, rng, -1.0, 1.0);

        const DeformedFeatures fw = deform_feature(cloud, tracker, gate, t);
        GaussianCloud cloud_grad = GaussianCloud::zeros(n, 0, d);
        SemanticTracker tracker_grad = SemanticTracker::zeros(d);
        FdmParams gate_grad = FdmParams::identity(n, 1, 4);
        std::fill(gate_grad.centers.begin(), gate_grad.centers.end(), 0.0);
        std::fill(gate_grad.widths.begin(), gate_grad.widths.end(), 0.0);
        deform_feature_backward(cloud, tracker, gate, t, fw, up, cloud_grad, tracker_grad, gate_grad);

        auto f = [&] { return weighted_sum(deform_feature(cloud, tracker, gate, t).features, up); };
        auto pattern = [&] { return tracker_pattern(tracker, cloud, t); };
        auto run = [&](std::vector<double>& values, const std::vector<double>& grads) {
            for (std::size_t i : pick(values.size(), opt.samples_per_array, rng)) c.check(values[i], grads[i], f, pattern);
        };
        run(cloud.features, cloud_grad.features);
        run(tracker.conv1_weights, tracker_grad.conv1_weights);
        run(tracker.conv1_bias, tracker_grad.conv1_bias);
        run(tracker.conv2_weights, tracker_grad.conv2_weights);
        run(tracker.conv2_bias, tracker_grad.conv2_bias);
        run(tracker.head_weights, tracker_grad.head_weights);
        run(tracker.head_bias, tracker_grad.head_bias);
        run(gate.weights, gate_grad.weights);
        run(gate.centers, gate_grad.centers);
        run(gate.widths, gate_grad.widths);
    }
    return s;
}

// Settings without alpha thresholds and with footprints wide enough that the
// truncated tail is numerically zero; both keep the blend smooth.
RasterSettings smooth_settings() {
    RasterSettings r;
    r.alpha_min = 0.0;
    r.extent_sigma = 12.0;
    r.tile_size = 8;
    return r;
}

GradCheckSummary gradcheck_rasterizer(const GradCheckOptions& opt) {
    GradCheckSummary s = make_summary("rasterizer", 1e-3, 1e-4, opt.configs);
    Checker c{s, s.step};
    Rng rng(opt.seed ^ 0x5151u);
    const RasterSettings settings = smooth_settings();
    const int w = 20;
    const int h = 16;
    for (int k = 0; k < opt.configs; ++k) {
        const int d = 2;
        const std::size_t count = 1 + rng() % 20;
        SplatSet set;
        set.feature_dim = d;
        std::vector<double> depths(count);
        for (std::size_t i = 0; i < count; ++i) depths[i] = 1.0 + 0.05 * static_cast<double>(i) + uniform(rng, 0.0, 0.02);
        std::shuffle(depths.begin(), depths.end(), rng);
        for (std::size_t i = 0; i < count; ++i) {
            Splat2D sp;
            sp.center = Vec2(uniform(rng, 0.0, w - 1.0), uniform(rng, 0.0, h - 1.0));
            const double a = uniform(rng, 1.0, 6.0);
            const double b = uniform(rng, 1.0, 6.0);
            const double rho = uniform(rng, -0.6, 0.6);
            sp.cov2d = Vec3(a * a, rho * a * b, b * b);
            sp.view_depth = depths[i];
            sp.rgb = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
            sp.alpha_base = uniform(rng, 0.1, 0.95);
            sp.source_index = static_cast<std::uint32_t>(i);
            set.splats.push_back(sp);
            for (int j = 0; j < d; ++j) set.features.push_back(uniform(rng, -1, 1));
        }
        RenderGradient up = RenderGradient::zeros(w, h, d);
        fill_uniform(up.color, rng, -1, 1);
        fill_uniform(up.depth, rng, -1, 1);
        fill_uniform(up.feature, rng, -1, 1);
        auto f = [&] {
            const RenderOutput o = rasterize_forward(set, w, h, settings);
            return weighted_sum(o.color, up.color) + weighted_sum(o.depth, up.depth) + weighted_sum(o.feature, up.feature);
        };
        RasterTrace trace;
        rasterize_forward(set, w, h, settings, &trace);
        const SplatGradients g = rasterize_backward(set, settings, trace, up);
        for (std::size_t i = 0; i < count; ++i) {
            Splat2D& sp = set.splats[i];
            for (int a = 0; a < 2; ++a) c.check(sp.center[a], g.center[i][a], f);
            for (int a = 0; a < 3; ++a) c.check(sp.cov2d[a], g.cov2d[i][a], f);
            c.check(sp.view_depth, g.view_depth[i], f);
            for (int a = 0; a < 3; ++a) c.check(sp.rgb[a], g.rgb[i][a], f);
            c.check(sp.alpha_base, g.alpha_base[i], f);
            for (int j = 0; j < d; ++j) c.check(set.features[i * d + j], g.features[i * d + j], f);
        }
    }
    return s;
}

GradCheckSummary gradcheck_full_chain(const GradCheckOptions& opt) {
    GradCheckSummary s = make_summary("full-chain", 1e-3, 1e-5, opt.configs);
    Checker c{s, s.step};
    Rng rng(opt.seed ^ 0xC4A1u);
    const RasterSettings settings = smooth_settings();
    const int w = 24;
    const int h = 20;
    Camera cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = 24.0;
    cam.cx = 0.5 * (w - 1);
    cam.cy = 0.5 * (h - 1);
    cam.near = 0.1;
    cam.far = 20.0;
    for (int k = 0; k < opt.configs; ++k) {
        const int d = 2;
        const std::size_t n = 1 + rng() % 8;
        GaussianCloud cloud = GaussianCloud::zeros(n, 1, d);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = 2.5 + 0.25 * static_cast<double>(i) + uniform(rng, 0.0, 0.1);
            cloud.means[3 * i] = uniform(rng, -0.35, 0.35) * z;
            cloud.means[3 * i + 1] = uniform(rng, -0.3, 0.3) * z;
            cloud.means[3 * i + 2] = z;
            Vec4 q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
            q.normalize();
            for (int a = 0; a < 4; ++a) cloud.rotations[4 * i + a] = q[a];
            for (int a = 0; a < 3; ++a) cloud.log_scales[3 * i + a] = std::log(uniform(rng, 0.08, 0.3));
            cloud.opacity_logits[i] = uniform(rng, -2.0, 2.0);
        }
        fill_uniform(cloud.sh_coeffs, rng, -0.4, 0.4);
        fill_uniform(cloud.features, rng, -1, 1);
        SceneModel model = SceneModel::create(cloud, 4, rng());
        model.tracker = random_tracker(d, rng);
        model.deformation.mean = random_bank(n, 3, 4, rng, 0.05);
        model.deformation.rotation = random_bank(n, 4, 4, rng, 0.1);
        model.deformation.scale = random_bank(n, 3, 4, rng, 0.1);
        model.deformation.feature = random_bank(n, 1, 4, rng, 1.0);
        const double t = uniform(rng, 0.0, 1.0);

        RenderGradient up = RenderGradient::zeros(w, h, d);
        fill_uniform(up.color, rng, -1, 1);
        fill_uniform(up.depth, rng, -1, 1);
        fill_uniform(up.feature, rng, -1, 1);

        const ModelForward fw = render_model(model, cam, t, settings);
        SceneModel grad = model.zeros_like();
        backward_model(model, cam, settings, fw, up, grad);

        auto f = [&] {
            const RenderOutput o = render_model(model, cam, t, settings).output;
            return weighted_sum(o.color, up.color) + weighted_sum(o.depth, up.depth) + weighted_sum(o.feature, up.feature);
        };
        auto pattern = [&] {
            const ModelForward m = render_model(model, cam, t, settings);
            std::vector<std::uint8_t> bits = tracker_pattern(model.tracker, model.cloud, t);
            bits.insert(bits.end(), m.rgb_open.begin(), m.rgb_open.end());
            for (std::uint32_t i : depth_order(m.splats)) bits.push_back(static_cast<std::uint8_t>(m.splats.splats[i].source_index));
            return bits;
        };
        std::vector<ParameterView> params = model_parameters(model);
        const std::vector<ParameterView> grads = model_parameters(grad);
        for (std::size_t a = 0; a < params.size(); ++a) {
            for (std::size_t i : pick(params[a].values.size(), opt.samples_per_array, rng)) {
                c.check(params[a].values[i], grads[a].values[i], f, pattern);
            }
        }
    }
    return s;
}

GradCheckSummary gradcheck_codec(const GradCheckOptions& opt) {
    GradCheckSummary s = make_summary("codec", 1e-3, 1e-6, opt.configs);
    Checker c{s, s.step};
    Rng rng(opt.seed ^ 0xC0DEu);
    for (int k = 0; k < opt.configs; ++k) {
        const int df = 6;
        const int d = 2;
        const std::size_t rows = 3;
        FeatureCodec codec = FeatureCodec::initialized(df, d, rng());
        for (std::span<double> p : codec_parameters(codec)) {
            for (double& x : p) x += 0.05 * uniform(rng, -1, 1);
        }
        std::vector<double> batch(rows * df);
        fill_uniform(batch, rng, -1, 1);
        FeatureCodec grad = FeatureCodec::zeros(df, d);
        codec_loss(codec, batch, rows, &grad);
        auto f = [&] { return codec_loss(codec, batch, rows).total; };
        // Kink signature: the ReLU pattern of the whole network.
        auto pattern = [&] {
            std::vector<std::uint8_t> bits;
            std::vector<double> x = batch;
            for (const std::vector<LinearLayer>* stack : {&codec.encoder, &codec.decoder}) {
                for (std::size_t l = 0; l < stack->size(); ++l) {
                    const LinearLayer& L = (*stack)[l];
                    std::vector<double> y(rows * L.out);
                    for (std::size_t r = 0; r < rows; ++r) {
                        for (int o = 0; o < L.out; ++o) {
                            double z = L.bias[o];
                            for (int i = 0; i < L.in; ++i) z += L.weights[o * L.in + i] * x[r * L.in + i];
                            const bool hidden = l + 1 < stack->size();
                            if (hidden) bits.push_back(z > 0.0);
                            y[r * L.out + o] = hidden ? std::max(z, 0.0) : z;
                        }
                    }
                    x = std::move(y);
                }
            }
            return bits;
        };
        std::vector<std::span<double>> params = codec_parameters(codec);
        std::vector<std::span<double>> grads = codec_parameters(grad);
        for (std::size_t a = 0; a < params.size(); ++a) {
            for (std::size_t i : pick(params[a].size(), opt.samples_per_array, rng)) {
                c.check(params[a][i], grads[a][i], f, pattern);
            }
        }
    }
    return s;
}

GradCheckSummary gradcheck_losses(const GradCheckOptions& opt) {
    GradCheckSummary s = make_summary("losses", 1e-3, 1e-6, opt.configs);
    Checker c{s, s.step};
    Rng rng(opt.seed ^ 0x1055u);
    const double margin = 1e-3;
    // Random value at least `margin` away from `ref`.
    auto away = [&](double ref, double lo, double hi) {
        for (;;) {
            const double v = uniform(rng, lo, hi);
            if (std::abs(v - ref) >= margin) return v;
        }
    };
    for (int k = 0; k < opt.configs; ++k) {
        const int w = 6;
        const int h = 5;
        const int d = 2;
        const std::size_t px = static_cast<std::size_t>(w) * h;

        LossTargets tg;
        tg.width = w;
        tg.height = h;
        tg.feature_dim = d;
        tg.color.resize(px * 3);
        tg.depth.resize(px);
        tg.feature.resize(px * d);
        tg.labels.resize(px);
        fill_uniform(tg.color, rng, 0, 1);
        fill_uniform(tg.feature, rng, -1, 1);
        for (std::size_t p = 0; p < px; ++p) {
            tg.depth[p] = (rng() % 7 == 0) ? 0.0 : uniform(rng, 1.0, 3.0);
            tg.labels[p] = static_cast<std::uint16_t>(rng() % 4);
        }

        RenderOutput r = RenderOutput::zeros(w, h, d);
        for (std::size_t i = 0; i < r.color.size(); ++i) r.color[i] = away(tg.color[i], 0, 1);
        for (std::size_t i = 0; i < r.feature.size(); ++i) r.feature[i] = away(tg.feature[i], -1, 1);
        for (std::size_t p = 0; p < px; ++p) {
            const double inv_t = tg.depth[p] > 0 ? 1.0 / tg.depth[p] : 0.0;
            // |1/D_hat - 1/D| >= margin
            for (;;) {
                r.depth[p] = uniform(rng, 0.5, 4.0);
                if (tg.depth[p] <= 0 || std::abs(inv_t - 1.0 / r.depth[p]) >= margin) break;
            }
        }
        LossWeights wts;
        wts.lambda = uniform(rng, 0.1, 1.0);
        wts.region_min_pixels = 3;

        RenderGradient g;
        total_loss(r, tg, wts, &g);
        auto f = [&] { return total_loss(r, tg, wts).total; };
        // Kink signature: every |.| argument sign in the composite.
        auto pattern = [&] {
            std::vector<std::uint8_t> bits;
            auto signs = [&](const std::vector<double>& grad) {
                for (double v : grad) bits.push_back(static_cast<std::uint8_t>(v > 0 ? 2 : (v < 0 ? 1 : 0)));
            };
            signs(l1_loss(r.color, tg.color).grad);
            signs(l1_loss(r.feature, tg.feature).grad);
            signs(inverse_depth_loss(r.depth, tg.depth, wts.depth_epsilon).grad);
            signs(tv_loss(r.color, w, h, 3).grad);
            signs(tv_loss(r.depth, w, h, 1).grad);
            signs(tv_loss(r.feature, w, h, d).grad);
            signs(region_smoothness_loss(r.feature, tg.labels, w, h, d, wts.region_min_pixels).grad);
            return bits;
        };
        for (std::size_t i = 0; i < r.color.size(); ++i) c.check(r.color[i], g.color[i], f, pattern);
        for (std::size_t i = 0; i < r.depth.size(); ++i) c.check(r.depth[i], g.depth[i], f, pattern);
        for (std::size_t i = 0; i < r.feature.size(); ++i) c.check(r.feature[i], g.feature[i], f, pattern);
    }
    return s;
}

std::vector<GradCheckSummary> gradcheck_all(const GradCheckOptions& options) {
    return {gradcheck_fdm(options),        gradcheck_tracker(options), gradcheck_rasterizer(options),
            gradcheck_full_chain(options), gradcheck_codec(options),   gradcheck_losses(options)};
}

}  // namespace semsplat
