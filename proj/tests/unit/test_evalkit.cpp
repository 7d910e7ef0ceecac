// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixture.hpp"
#include "json.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/evalkit.hpp"
#include "semsplat/service.hpp"

using namespace semsplat;

TEST(Psnr, IdenticalImagesAreSentinel) {
    const std::vector<double> a = {0.1, 0.2, 0.3};
    EXPECT_EQ(psnr(a, a), kPsnrIdentical);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Psnr, UniformDifferenceClosedForm) {
    const std::vector<double> a(12, 0.5), b(12, 0.6);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, MatchesScalarLoopOracle) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> a(1000), b(1000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.size());
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / mse), 1e-9);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
    const std::vector<double> ref(100, 0.5);
    double last = kPsnrIdentical;
    for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
        std::vector<double> img(ref);
        for (std::size_t i = 0; i < img.size(); ++i) img[i] += (i % 2 ? amp : -amp);
        const double p = psnr(img, ref);
        EXPECT_LT(p, last);
        last = p;
    }
}

TEST(Psnr, ShapeMismatchThrows) {
    const std::vector<double> a(3), b(4);
    EXPECT_THROW(psnr(a, b), Error);
}

TEST(Psnr, QuantizedAgainstEightBitReference) {
    const std::vector<double> render = {0.0, 1.0, 0.5};
    const std::vector<std::uint8_t> ref = {0, 255, 128};
    EXPECT_EQ(psnr_quantized(render, ref), kPsnrIdentical);
}

TEST(Miou, IdenticalMasksAre100) {
    const std::vector<std::vector<std::uint8_t>> m = {{1, 1, 0, 0}};
    const IoUReport r = miou(m, m);
    EXPECT_DOUBLE_EQ(*r.per_class[0], 100.0);
    EXPECT_DOUBLE_EQ(r.mean, 100.0);
}

TEST(Miou, DisjointMasksAreZero) {
    const IoUReport r = miou({{1, 1, 0, 0}}, {{0, 0, 1, 1}});
    EXPECT_DOUBLE_EQ(*r.per_class[0], 0.0);
}

TEST(Miou, HalfCoverageIsFifty) {
    const IoUReport r = miou({{1, 0, 0, 0}}, {{1, 1, 0, 0}});
    EXPECT_DOUBLE_EQ(*r.per_class[0], 50.0);
}

TEST(Miou, EmptyUnionExcludedAndFlagged) {
    const IoUReport r = miou({{1, 0}, {0, 0}}, {{1, 0}, {0, 0}});
    EXPECT_FALSE(r.per_class[1].has_value());
    EXPECT_EQ(r.excluded, (std::vector<std::size_t>{1}));
    EXPECT_DOUBLE_EQ(r.mean, 100.0);
}

TEST(Miou, SymmetricInPredictionAndTruth) {
    const std::vector<std::vector<std::uint8_t>> a = {{1, 1, 0, 1, 0}}, b = {{0, 1, 1, 1, 0}};
    EXPECT_DOUBLE_EQ(*miou(a, b).per_class[0], *miou(b, a).per_class[0]);
}

TEST(Miou, ShapeMismatchThrows) {
    EXPECT_THROW(miou({{1, 0}}, {{1, 0, 0}}), Error);
}

TEST(Latency, SingleSampleIsMedian) {
    const LatencyStats s = latency_stats({7.5});
    EXPECT_DOUBLE_EQ(s.median_ms, 7.5);
    EXPECT_DOUBLE_EQ(s.p95_ms, 7.5);
    EXPECT_DOUBLE_EQ(s.fps, 1000.0 / 7.5);
}

TEST(Latency, NearestRankPercentile) {
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(i);
    const LatencyStats s = latency_stats(v);
    EXPECT_DOUBLE_EQ(s.median_ms, 10.5);
    EXPECT_DOUBLE_EQ(s.p95_ms, 19.0);
}

TEST(BenchQuery, FakeClockTimings) {
    const auto& dir = semsplat::testing::trained_fixture();
    const LoadedScene scene = load_scene(dir / "checkpoint", dir / "codec", dir / "lexicon.json");
    QueryRequest q;
    q.prompt = "liver";
    double now = 0.0;
    int calls = 0;
    const Clock fake = [&] {
        ++calls;
        now += 2.5;  // each query appears to take 2.5 ms
        return now;
    };
    const LatencyStats one = bench_query(scene.engine, {q}, 1, 1, fake);
    EXPECT_EQ(one.samples_ms.size(), 1u);
    EXPECT_DOUBLE_EQ(one.median_ms, 2.5);
    EXPECT_EQ(calls, 2);  // the warmup run is not timed
    const LatencyStats two = bench_query(scene.engine, {q}, 2, 1, fake);
    EXPECT_DOUBLE_EQ(two.p95_ms, two.median_ms);
    EXPECT_DOUBLE_EQ(two.fps, 1000.0 / two.median_ms);
}

TEST(BenchQuery, RequiresWarmup) {
    const auto& dir = semsplat::testing::trained_fixture();
    const LoadedScene scene = load_scene(dir / "checkpoint", dir / "codec", dir / "lexicon.json");
    QueryRequest q;
    q.prompt = "liver";
    EXPECT_THROW(bench_query(scene.engine, {q}, 1, 0), Error);
}

TEST(Evaluate, ReportCoversClassesAndFrames) {
    const auto& dir = semsplat::testing::trained_fixture();
    const LoadedScene scene = load_scene(dir / "checkpoint", dir / "codec", dir / "lexicon.json");
    const Dataset ds = load_dataset(dir / "manifest.json");
    const EvalReport rep = evaluate(scene.engine, ds, ds.holdout_indices());
    EXPECT_EQ(rep.class_names.size(), 3u);
    EXPECT_EQ(rep.psnr_per_frame.size(), 2u);
    for (const auto& c : rep.iou.per_class) {
        if (c) {
            EXPECT_GE(*c, 0.0);
            EXPECT_LE(*c, 100.0);
        }
    }
    const nlohmann::json j = nlohmann::json::parse(rep.to_json());
    EXPECT_TRUE(j.contains("miou"));
    EXPECT_NE(rep.to_table().find("liver"), std::string::npos);
}
