// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/image_io.hpp"

namespace semsplat {

double psnr(std::span<const double> image, std::span<const double> reference) {
    if (image.size() != reference.size()) fail(ErrorCode::ShapeMismatch, "psnr: image sizes differ");
    if (image.empty()) fail(ErrorCode::InvalidArgument, "psnr: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double d = image[i] - reference[i];
        sum += d * d;
    }
    if (sum == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(1.0 / (sum / static_cast<double>(image.size())));
}

double psnr_quantized(std::span<const double> render, std::span<const std::uint8_t> reference) {
    if (render.size() != reference.size()) fail(ErrorCode::ShapeMismatch, "psnr: image sizes differ");
    std::vector<double> a(render.size()), b(reference.size());
    for (std::size_t i = 0; i < render.size(); ++i) {
        a[i] = quantize_unit(render[i]) / 255.0;
        b[i] = reference[i] / 255.0;
    }
    return psnr(a, b);
}

void IoUAccumulator::add(std::size_t cls, std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
    if (pred.size() != gt.size()) fail(ErrorCode::ShapeMismatch, "iou: mask sizes differ");
    if (cls >= inter_.size()) fail(ErrorCode::InvalidArgument, "iou: class index out of range");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        inter_[cls] += (p && g) ? 1 : 0;
        uni_[cls] += (p || g) ? 1 : 0;
    }
}

IoUReport iou_report(const IoUAccumulator& acc) {
    IoUReport r;
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < acc.classes(); ++c) {
        if (acc.union_count(c) == 0) {
            r.per_class.push_back(std::nullopt);
            r.excluded.push_back(c);
            continue;
        }
        const double iou = 100.0 * static_cast<double>(acc.intersection(c)) / static_cast<double>(acc.union_count(c));
        r.per_class.push_back(iou);
        sum += iou;
        ++counted;
    }
    r.mean = counted ? sum / static_cast<double>(counted) : 0.0;
    return r;
}

IoUReport miou(const std::vector<std::vector<std::uint8_t>>& pred, const std::vector<std::vector<std::uint8_t>>& gt) {
    if (pred.size() != gt.size()) fail(ErrorCode::ShapeMismatch, "miou: class counts differ");
    IoUAccumulator acc(pred.size());
    for (std::size_t c = 0; c < pred.size(); ++c) acc.add(c, pred[c], gt[c]);
    return iou_report(acc);
}

LatencyStats latency_stats(std::vector<double> samples_ms) {
    if (samples_ms.empty()) fail(ErrorCode::InvalidArgument, "latency_stats: no samples");
    LatencyStats s;
    s.samples_ms = samples_ms;
    std::sort(samples_ms.begin(), samples_ms.end());
    const std::size_t n = samples_ms.size();
    s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    s.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
    s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(n);
    s.fps = s.median_ms > 0.0 ? 1000.0 / s.median_ms : std::numeric_limits<double>::infinity();
    return s;
}

Clock steady_clock_ms() {
    return [] {
        using namespace std::chrono;
        return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
    };
}

LatencyStats bench_query(const QueryEngine& engine, const std::vector<QueryRequest>& requests, int repeats, int warmup,
                         const Clock& clock) {
    if (requests.empty()) fail(ErrorCode::InvalidArgument, "bench_query: no requests");
    if (repeats < 1) fail(ErrorCode::InvalidArgument, "bench_query: repeats must be >= 1");
    if (warmup < 1) fail(ErrorCode::InvalidArgument, "bench_query: at least one warmup run is required");
    for (int i = 0; i < warmup; ++i) {
        for (const QueryRequest& r : requests) engine.query(r);
    }
    std::vector<double> samples;
    for (int i = 0; i < repeats; ++i) {
        for (const QueryRequest& r : requests) {
            const double start = clock();
            engine.query(r);
            samples.push_back(clock() - start);
        }
    }
    return latency_stats(std::move(samples));
}

std::vector<ResolutionBench> bench_resolutions(const QueryEngine& engine, const QueryRequest& request,
                                               const std::vector<std::pair<int, int>>& sizes, int repeats, int warmup,
                                               const Clock& clock) {
    std::vector<ResolutionBench> out;
    for (const auto& [w, h] : sizes) {
        QueryRequest r = request;
        r.camera = engine.camera().resized(w, h);
        out.push_back({w, h, bench_query(engine, {r}, repeats, warmup, clock)});
    }
    return out;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["threshold"] = threshold;
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < iou.per_class.size(); ++c) {
        nlohmann::json e;
        e["name"] = c < class_names.size() ? class_names[c] : std::to_string(c);
        if (iou.per_class[c]) {
            e["iou"] = *iou.per_class[c];
        } else {
            e["iou"] = nullptr;
            e["excluded"] = true;
        }
        classes.push_back(e);
    }
    j["classes"] = classes;
    j["miou"] = iou.mean;
    j["frames"] = frames;
    nlohmann::json ps = nlohmann::json::array();
    for (double p : psnr_per_frame) ps.push_back(std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p));
    j["psnr_per_frame"] = ps;
    j["psnr_mean"] = std::isinf(psnr_mean) ? nlohmann::json("inf") : nlohmann::json(psnr_mean);
    if (latency) {
        j["latency"] = {{"median_ms", latency->median_ms}, {"p95_ms", latency->p95_ms},
                        {"mean_ms", latency->mean_ms}, {"fps", latency->fps}};
    }
    if (!config_echo.empty()) j["config"] = nlohmann::json::parse(config_echo, nullptr, false);
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "class                  IoU(%)\n";
    for (std::size_t c = 0; c < iou.per_class.size(); ++c) {
        std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
        name.resize(22, ' ');
        os << name << " ";
        if (iou.per_class[c]) {
            os << *iou.per_class[c] << "\n";
        } else {
            os << "excluded (empty union)\n";
        }
    }
    os << "mIoU                   " << iou.mean << "\n";
    os << "PSNR mean (dB)         " << psnr_mean << " over " << frames.size() << " frames\n";
    if (latency) {
        os << "query median (ms)      " << latency->median_ms << "\n";
        os << "query p95 (ms)         " << latency->p95_ms << "\n";
        os << "query FPS              " << latency->fps << "\n";
    }
    return os.str();
}

EvalReport evaluate(const QueryEngine& engine, const Dataset& dataset, const std::vector<std::size_t>& frames,
                    double threshold) {
    EvalReport rep;
    rep.threshold = threshold;
    rep.frames = frames;
    rep.class_names = dataset.manifest.classes;
    IoUAccumulator acc(rep.class_names.size());
    double psum = 0.0;
    for (std::size_t idx : frames) {
        const FrameSample& f = dataset.frames.at(idx);
        const RenderOutput out = engine.render(f.timestamp);
        const double p = psnr_quantized(out.color, f.color);
        rep.psnr_per_frame.push_back(p);
        psum += p;
        if (f.labels.empty()) continue;
        // One render serves every prompt of the frame.
        for (std::size_t c = 0; c < rep.class_names.size(); ++c) {
            QueryRequest req;
            req.prompt = rep.class_names[c];
            const std::vector<double> text = engine.resolve(req);
            const QueryResult r = score_feature_map(engine.codec(), out.feature, out.width, out.height, text,
                                                    engine.lexicon().canonical, threshold);
            std::vector<std::uint8_t> gt(f.labels.size());
            for (std::size_t p = 0; p < gt.size(); ++p) gt[p] = f.labels[p] == c + 1 ? 1 : 0;
            acc.add(c, r.mask, gt);
        }
    }
    rep.psnr_mean = frames.empty() ? 0.0 : psum / static_cast<double>(frames.size());
    rep.iou = iou_report(acc);
    return rep;
}

}  // namespace semsplat
