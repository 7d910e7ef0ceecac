// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "fixture.hpp"
#include "json.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/trainer.hpp"

using namespace semsplat;
namespace fs = std::filesystem;

namespace {

const Dataset& tiny_dataset() {
    static const Dataset ds = load_dataset(semsplat::testing::trained_fixture() / "manifest.json");
    return ds;
}

bool same_parameters(SceneModel a, SceneModel b) {
    const auto pa = model_parameters(a);
    const auto pb = model_parameters(b);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin(), pb[i].values.end())) return false;
    }
    return true;
}

}  // namespace

TEST(TrainConfig, JsonRoundTrip) {
    TrainConfig c;
    c.iterations = 17;
    c.seed = 4;
    c.tracker_enabled = false;
    c.loss.region_smoothness = false;
    c.lr_multipliers[2] = 3.5;
    const TrainConfig d = TrainConfig::from_json(c.to_json());
    EXPECT_EQ(d.to_json(), c.to_json());
}

TEST(TrainConfig, ValidateRejectsBadValues) {
    TrainConfig c;
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), Error);
    c = TrainConfig{};
    c.init_opacity = 1.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_THROW(TrainConfig::from_json("{\"iterations\": \"many\"}"), Error);
}

TEST(Trainer, InitializesFromFirstTrainingFrame) {
    const Trainer t(tiny_dataset(), semsplat::testing::tiny_train_config());
    EXPECT_EQ(t.init_frame(), 1u);
    EXPECT_TRUE(is_holdout(t.holdout_frame(), 8));
    for (std::size_t f : t.train_frames()) EXPECT_FALSE(is_holdout(f, 8));
}

TEST(Trainer, LossDecreases) {
    TrainConfig c = semsplat::testing::tiny_train_config();
    c.iterations = 60;
    Trainer t(tiny_dataset(), c);
    double early = 0.0, late = 0.0;
    t.run([&](const IterationRecord& r) {
        if (r.iteration <= 10) early += r.loss.total;
        if (r.iteration > 50) late += r.loss.total;
    });
    EXPECT_LT(late, early);
    EXPECT_EQ(t.iteration(), 60);
}

TEST(Trainer, SameSeedIsBitIdentical) {
    const TrainConfig c = semsplat::testing::tiny_train_config();
    const TrainResult a = train_scene(tiny_dataset(), c);
    const TrainResult b = train_scene(tiny_dataset(), c);
    EXPECT_TRUE(same_parameters(a.checkpoint.model, b.checkpoint.model));
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss.total, b.history[i].loss.total);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
    TrainConfig c = semsplat::testing::tiny_train_config();
    c.iterations = 20;
    const TrainResult full = train_scene(tiny_dataset(), c);

    TrainConfig half = c;
    half.iterations = 10;
    Trainer first(tiny_dataset(), half);
    first.run();
    const fs::path dir = semsplat::testing::temp_dir("resume");
    save_checkpoint(first.checkpoint(), dir / "ck");
    Trainer second(tiny_dataset(), c, load_checkpoint(dir / "ck"));
    second.run();
    EXPECT_TRUE(same_parameters(second.model(), full.checkpoint.model));
}

TEST(Trainer, TrackerDisabledLeavesTrackerUntouched) {
    TrainConfig c = semsplat::testing::tiny_train_config();
    c.tracker_enabled = false;
    c.iterations = 5;
    Trainer t(tiny_dataset(), c);
    const SemanticTracker before = t.model().tracker;
    t.run();
    EXPECT_EQ(t.model().tracker.head_weights, before.head_weights);
    EXPECT_FALSE(t.model().tracker_enabled);
}

TEST(Trainer, NonFiniteLossSavesDiagnosticAndThrows) {
    Dataset ds = tiny_dataset();
    for (FrameSample& f : ds.frames) {
        for (float& v : f.features) v = std::numeric_limits<float>::quiet_NaN();
    }
    Trainer t(ds, semsplat::testing::tiny_train_config());
    const fs::path dir = semsplat::testing::temp_dir("diverge");
    t.set_diagnostic_dir(dir / "diag");
    try {
        t.step();
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Divergence);
        EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
    }
    EXPECT_TRUE(fs::exists(dir / "diag" / "checkpoint.json"));
}

TEST(Trainer, LogHasOneRecordPerIteration) {
    const fs::path dir = semsplat::testing::temp_dir("trainlog");
    TrainConfig c = semsplat::testing::tiny_train_config();
    c.iterations = 12;
    train_scene(tiny_dataset(), c, dir / "log.jsonl");
    std::ifstream in(dir / "log.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        EXPECT_EQ(j["iter"], n + 1);
        EXPECT_TRUE(j.contains("color"));
        EXPECT_TRUE(j.contains("region"));
        ++n;
    }
    EXPECT_EQ(n, 12);
}

TEST(Trainer, CheckpointRecordsScene) {
    const Checkpoint ck = load_checkpoint(semsplat::testing::trained_fixture() / "checkpoint");
    const nlohmann::json s = nlohmann::json::parse(ck.scene_json);
    EXPECT_EQ(s["frames"], 9);
    EXPECT_EQ(s["classes"].size(), 3u);
    EXPECT_EQ(ck.iteration, 30);
}
