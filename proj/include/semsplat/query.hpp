// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semsplat/errors.hpp"
#include "semsplat/feature_codec.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

constexpr double kDefaultThreshold = 0.4;

/// Prompt -> unit-norm embedding table plus the four canonical phrases.
struct QueryLexicon {
    static const std::array<std::string, 4> kCanonicalPhrases;  // object, things, stuff, texture

    int dim = 0;
    std::array<std::vector<double>, 4> canonical;
    std::map<std::string, std::vector<double>> prompts;

    /// Normalizes and inserts; throws on a wrong length or a zero vector.
    void add_prompt(const std::string& name, std::span<const double> embedding);
    void set_canonical(const std::string& phrase, std::span<const double> embedding);
    const std::vector<double>* find(const std::string& prompt) const;
    /// Prompt keys ordered by edit distance (ties alphabetical).
    std::vector<std::string> nearest_keys(const std::string& prompt, std::size_t count = 3) const;
    std::vector<std::string> prompt_names() const;
};

/// Throws Error(Validation) naming a missing canonical phrase.
QueryLexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const std::filesystem::path& path, const QueryLexicon& lexicon);

std::size_t edit_distance(const std::string& a, const std::string& b);

/// Unknown prompt with its nearest lexicon keys.
class UnknownPromptError : public Error {
public:
    UnknownPromptError(const std::string& prompt, std::vector<std::string> suggestions);
    const std::vector<std::string>& suggestions() const { return suggestions_; }

private:
    std::vector<std::string> suggestions_;
};

/// min_i exp(a) / (exp(a) + exp(b_i)) with a = img.text and b_i = img.canon_i.
double relevancy_score(std::span<const double> img, std::span<const double> text,
                       const std::array<std::vector<double>, 4>& canonical);
/// Same score from precomputed dot products.
double relevancy_from_dots(double text_dot, std::span<const double> canonical_dots);

struct QueryResult {
    int width = 0;
    int height = 0;
    std::string prompt;
    double threshold = kDefaultThreshold;
    std::vector<double> relevancy;    // H*W
    std::vector<std::uint8_t> mask;   // H*W, 1 where relevancy >= threshold

    double min_score() const;
    double max_score() const;
    double mean_score() const;
    double coverage() const;  // fraction of mask pixels
};

/// Scores every pixel of a rendered H*W*d feature map.
QueryResult score_feature_map(const FeatureCodec& codec, std::span<const double> feature, int width, int height,
                              std::span<const double> text, const std::array<std::vector<double>, 4>& canonical,
                              double threshold);

struct QueryRequest {
    std::string prompt;
    std::optional<std::vector<double>> embedding;  // used instead of the lexicon when present
    double time = 0.0;
    double threshold = kDefaultThreshold;
    std::optional<Camera> camera;
};

/// Read-only bundle of a trained model, codec and lexicon.
class QueryEngine {
public:
    QueryEngine(SceneModel model, FeatureCodec codec, QueryLexicon lexicon, Camera camera,
                RasterSettings settings = {});

    /// Resolves the prompt (or raw embedding) to a unit embedding.
    std::vector<double> resolve(const QueryRequest& request) const;
    QueryResult query(const QueryRequest& request) const;
    RenderOutput render(double time, const std::optional<Camera>& camera = std::nullopt) const;

    const SceneModel& model() const { return model_; }
    const FeatureCodec& codec() const { return codec_; }
    const QueryLexicon& lexicon() const { return lexicon_; }
    const Camera& camera() const { return camera_; }
    const RasterSettings& settings() const { return settings_; }

private:
    SceneModel model_;
    FeatureCodec codec_;
    QueryLexicon lexicon_;
    Camera camera_;
    RasterSettings settings_;
};

}  // namespace semsplat
