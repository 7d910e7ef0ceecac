// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "fixture.hpp"
#include "semsplat/checkpoint.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/tensor_io.hpp"

using namespace semsplat;

namespace {

Checkpoint random_checkpoint(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    GaussianCloud c = GaussianCloud::zeros(7, 1, 3);
    for (double& v : c.means) v = u(rng);
    for (double& v : c.rotations) v = u(rng);
    for (double& v : c.sh_coeffs) v = u(rng);
    Checkpoint k;
    k.model = SceneModel::create(c, 4, seed);
    for (ParameterView& p : model_parameters(k.model)) {
        for (double& v : p.values) v += 1e-3 * u(rng);
        k.moments.emplace_back(p.values.size());
        for (double& v : k.moments.back().m) v = u(rng);
        for (double& v : k.moments.back().v) v = std::abs(u(rng));
    }
    k.adam_steps = 12;
    k.iteration = 12;
    k.rng_state = "1 2 3";
    k.config_json = R"({"iterations":12})";
    k.config_hash = config_hash(k.config_json);
    k.scene_json = R"({"frames":3})";
    return k;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto dir = semsplat::testing::temp_dir("ckpt_roundtrip");
    Checkpoint a = random_checkpoint(1);
    save_checkpoint(a, dir / "ck");
    Checkpoint b = load_checkpoint(dir / "ck");
    const auto pa = model_parameters(a.model);
    const auto pb = model_parameters(b.model);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].name, pb[i].name);
        EXPECT_TRUE(std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin())) << pa[i].name;
        EXPECT_EQ(a.moments[i].m, b.moments[i].m);
        EXPECT_EQ(a.moments[i].v, b.moments[i].v);
    }
    EXPECT_EQ(b.iteration, 12);
    EXPECT_EQ(b.rng_state, "1 2 3");
    EXPECT_EQ(b.config_hash, a.config_hash);
    EXPECT_EQ(b.scene_json, a.scene_json);
}

TEST(Checkpoint, SavingTwiceGivesIdenticalFiles) {
    const auto dir = semsplat::testing::temp_dir("ckpt_twice");
    const Checkpoint a = random_checkpoint(2);
    save_checkpoint(a, dir / "x");
    save_checkpoint(a, dir / "y");
    for (const auto& e : std::filesystem::directory_iterator(dir / "x")) {
        EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(dir / "y" / e.path().filename())) << e.path();
    }
}

TEST(Checkpoint, ExpectationMismatchNamesField) {
    const auto dir = semsplat::testing::temp_dir("ckpt_expect");
    save_checkpoint(random_checkpoint(3), dir / "ck");
    CheckpointExpectations ex;
    ex.feature_dim = 5;
    try {
        load_checkpoint(dir / "ck", ex);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
        EXPECT_NE(std::string(e.what()).find("feature_dim"), std::string::npos);
    }
}

TEST(Checkpoint, CorruptTensorNamesField) {
    const auto dir = semsplat::testing::temp_dir("ckpt_corrupt");
    save_checkpoint(random_checkpoint(4), dir / "ck");
    const auto file = dir / "ck" / "cloud.means.stpg";
    ASSERT_TRUE(std::filesystem::exists(file));
    auto bytes = read_file_bytes(file);
    bytes[30] ^= 1;
    write_file_bytes(file, bytes);
    try {
        load_checkpoint(dir / "ck");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CrcMismatch);
        EXPECT_NE(std::string(e.what()).find("cloud.means"), std::string::npos);
    }
}

TEST(Checkpoint, MissingDirectory) {
    EXPECT_THROW(load_checkpoint("/nonexistent/semsplat/ck"), Error);
}

TEST(Checkpoint, ConfigHashIsStable) {
    EXPECT_EQ(config_hash("{}"), config_hash("{}"));
    EXPECT_NE(config_hash("{}"), config_hash("{ }"));
    EXPECT_EQ(config_hash("{}").size(), 8u);
}

TEST(Codec, SaveLoadRoundTrip) {
    const auto dir = semsplat::testing::temp_dir("codec_io");
    const FeatureCodec c = FeatureCodec::initialized(16, 3, 9);
    save_codec(c, dir / "codec");
    const FeatureCodec d = load_codec(dir / "codec");
    ASSERT_EQ(c.encoder.size(), d.encoder.size());
    for (std::size_t i = 0; i < c.encoder.size(); ++i) {
        EXPECT_EQ(c.encoder[i].weights, d.encoder[i].weights);
        EXPECT_EQ(c.decoder[i].bias, d.decoder[i].bias);
    }
}
