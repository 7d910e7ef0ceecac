// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "fixture.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/query.hpp"
#include "semsplat/service.hpp"

using namespace semsplat;

namespace {

QueryLexicon axis_lexicon(int dim) {
    QueryLexicon lex;
    lex.dim = dim;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> v(dim, 0.0);
        v[i] = 1.0;
        lex.set_canonical(QueryLexicon::kCanonicalPhrases[i], v);
    }
    for (const char* name : {"liver", "grasper", "fat"}) {
        std::vector<double> v(dim, 0.1);
        v[4 + (name[0] % 3)] = 1.0;
        lex.add_prompt(name, v);
    }
    return lex;
}

}  // namespace

TEST(Relevancy, SymmetricDotsGiveOneHalf) {
    const std::vector<double> dots = {0.3, 0.3, 0.3, 0.3};
    EXPECT_DOUBLE_EQ(relevancy_from_dots(0.3, dots), 0.5);
}

TEST(Relevancy, ClosedFormAtUnitMargin) {
    const std::vector<double> dots = {-1.0, -1.0, -1.0, -1.0};
    EXPECT_NEAR(relevancy_from_dots(1.0, dots), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
}

TEST(Relevancy, MinimumOverCanonicalPhrases) {
    const std::vector<double> dots = {0.0, 0.5, -2.0, 0.1};
    const double a = 0.2;
    double expected = 1.0;
    for (double b : dots) expected = std::min(expected, std::exp(a) / (std::exp(a) + std::exp(b)));
    EXPECT_NEAR(relevancy_from_dots(a, dots), expected, 1e-15);
}

TEST(Relevancy, ScoreFromEmbeddings) {
    const QueryLexicon lex = axis_lexicon(8);
    std::vector<double> img(8, 0.0);
    img[0] = 1.0;  // aligned with canonical 0
    std::vector<double> text(8, 0.0);
    text[0] = 1.0;
    EXPECT_DOUBLE_EQ(relevancy_score(img, text, lex.canonical), 0.5);
}

TEST(ScoreFeatureMap, MaskIsScoreThresholdPixelwise) {
    const FeatureCodec codec = FeatureCodec::initialized(8, 2, 3);
    const QueryLexicon lex = axis_lexicon(8);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> feat(20 * 10 * 2);
    for (double& v : feat) v = n(rng);
    const auto& text = *lex.find("liver");
    for (double thr : {0.0, 0.4, 0.5, 1.0}) {
        const QueryResult r = score_feature_map(codec, feat, 20, 10, text, lex.canonical, thr);
        for (std::size_t p = 0; p < r.relevancy.size(); ++p) {
            ASSERT_EQ(r.mask[p], r.relevancy[p] >= thr ? 1 : 0);
            ASSERT_GE(r.relevancy[p], 0.0);
            ASSERT_LE(r.relevancy[p], 1.0);
        }
    }
}

TEST(Lexicon, NearestKeysByEditDistance) {
    const QueryLexicon lex = axis_lexicon(8);
    const auto keys = lex.nearest_keys("livr", 2);
    ASSERT_EQ(keys.size(), 2u);
    EXPECT_EQ(keys[0], "liver");
    EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
    EXPECT_EQ(edit_distance("", "abc"), 3u);
}

TEST(Lexicon, PromptsAreNormalized) {
    QueryLexicon lex = axis_lexicon(8);
    const std::vector<double> v = {3, 4, 0, 0, 0, 0, 0, 0};
    lex.add_prompt("x", v);
    EXPECT_NEAR((*lex.find("x"))[0], 0.6, 1e-15);
    EXPECT_EQ(lex.find("missing"), nullptr);
    EXPECT_THROW(lex.add_prompt("bad", std::vector<double>(3, 1.0)), Error);
    EXPECT_THROW(lex.add_prompt("zero", std::vector<double>(8, 0.0)), Error);
}

TEST(Lexicon, SaveLoadRoundTrip) {
    const auto dir = semsplat::testing::temp_dir("lexicon");
    const QueryLexicon lex = axis_lexicon(8);
    save_lexicon(dir / "l.json", lex);
    const QueryLexicon back = load_lexicon(dir / "l.json");
    EXPECT_EQ(back.dim, 8);
    EXPECT_EQ(back.prompt_names(), lex.prompt_names());
    EXPECT_EQ(*back.find("fat"), *lex.find("fat"));
}

TEST(Lexicon, MissingCanonicalPhraseIsNamed) {
    const auto dir = semsplat::testing::temp_dir("lexicon_bad");
    std::ofstream(dir / "l.json") << R"({"canonical":{"object":[1,0],"things":[0,1],"stuff":[1,1]},"prompts":{}})";
    try {
        load_lexicon(dir / "l.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Validation);
        EXPECT_NE(std::string(e.what()).find("texture"), std::string::npos);
    }
}

TEST(QueryEngine, UnknownPromptCarriesSuggestions) {
    const auto& dir = semsplat::testing::trained_fixture();
    const LoadedScene s = load_scene(dir / "checkpoint", dir / "codec", dir / "lexicon.json");
    QueryRequest req;
    req.prompt = "livre";
    try {
        s.engine.query(req);
        FAIL();
    } catch (const UnknownPromptError& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownPrompt);
        ASSERT_FALSE(e.suggestions().empty());
        EXPECT_EQ(e.suggestions()[0], "liver");
    }
}

TEST(QueryEngine, QueryIsDeterministicAndUsesRenderedFeatures) {
    const auto& dir = semsplat::testing::trained_fixture();
    const LoadedScene s = load_scene(dir / "checkpoint", dir / "codec", dir / "lexicon.json");
    QueryRequest req;
    req.prompt = "liver";
    req.time = 0.5;
    const QueryResult a = s.engine.query(req);
    const QueryResult b = s.engine.query(req);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.relevancy, b.relevancy);
    const RenderOutput r = s.engine.render(0.5);
    const QueryResult c = score_feature_map(s.engine.codec(), r.feature, r.width, r.height, *s.engine.lexicon().find("liver"),
                                            s.engine.lexicon().canonical, req.threshold);
    EXPECT_EQ(a.relevancy, c.relevancy);
}

TEST(QueryEngine, EmbeddingOverridesPrompt) {
    const auto& dir = semsplat::testing::trained_fixture();
    const LoadedScene s = load_scene(dir / "checkpoint", dir / "codec", dir / "lexicon.json");
    QueryRequest by_name;
    by_name.prompt = "grasper";
    QueryRequest by_vec;
    by_vec.prompt = "anything";
    by_vec.embedding = *s.engine.lexicon().find("grasper");
    EXPECT_EQ(s.engine.query(by_name).relevancy, s.engine.query(by_vec).relevancy);
}
