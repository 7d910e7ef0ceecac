// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/query.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "semsplat/tensor_io.hpp"

namespace semsplat {
namespace {

using nlohmann::json;

std::vector<double> normalized(std::span<const double> v, int dim, const std::string& what) {
    if (static_cast<int>(v.size()) != dim) {
        fail(ErrorCode::Validation, what + ": expected " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
    }
    double n2 = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) fail(ErrorCode::Validation, what + ": non-finite value");
        n2 += x * x;
    }
    if (n2 == 0.0) fail(ErrorCode::Validation, what + ": zero-norm embedding");
    std::vector<double> out(v.begin(), v.end());
    // Already unit length up to rounding: keep the bits so save/load round-trips exactly.
    if (std::abs(n2 - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon()) return out;
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : out) x *= inv;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
    return out;
}

}  // namespace

const std::array<std::string, 4> QueryLexicon::kCanonicalPhrases = {"object", "things", "stuff", "texture"};

void QueryLexicon::add_prompt(const std::string& name, std::span<const double> embedding) {
    if (name.empty()) fail(ErrorCode::Validation, "lexicon: empty prompt name");
    prompts[name] = normalized(embedding, dim, "lexicon prompt '" + name + "'");
}

void QueryLexicon::set_canonical(const std::string& phrase, std::span<const double> embedding) {
    const auto it = std::find(kCanonicalPhrases.begin(), kCanonicalPhrases.end(), phrase);
    if (it == kCanonicalPhrases.end()) fail(ErrorCode::Validation, "lexicon: '" + phrase + "' is not a canonical phrase");
    canonical[static_cast<std::size_t>(it - kCanonicalPhrases.begin())] =
        normalized(embedding, dim, "lexicon canonical '" + phrase + "'");
}

const std::vector<double>* QueryLexicon::find(const std::string& prompt) const {
    const auto it = prompts.find(prompt);
    return it == prompts.end() ? nullptr : &it->second;
}

std::vector<std::string> QueryLexicon::prompt_names() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : prompts) names.push_back(k);
    return names;
}

std::vector<std::string> QueryLexicon::nearest_keys(const std::string& prompt, std::size_t count) const {
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [k, v] : prompts) ranked.emplace_back(edit_distance(prompt, k), k);
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < count; ++i) out.push_back(ranked[i].second);
    return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

UnknownPromptError::UnknownPromptError(const std::string& prompt, std::vector<std::string> suggestions)
    : Error(ErrorCode::UnknownPrompt, "unknown prompt '" + prompt + "'; nearest: " + join(suggestions)),
      suggestions_(std::move(suggestions)) {}

QueryLexicon load_lexicon(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, path.string() + ": malformed lexicon (" + e.what() + ")");
    }
    if (!doc.is_object() || !doc.contains("canonical") || !doc["canonical"].is_object()) {
        fail(ErrorCode::Validation, path.string() + ": missing 'canonical' table");
    }
    QueryLexicon lex;
    auto vec = [&](const json& j, const std::string& where) {
        try {
            return j.get<std::vector<double>>();
        } catch (const json::exception&) {
            fail(ErrorCode::Validation, path.string() + ": " + where + " is not a numeric array");
        }
    };
    const json& canon = doc["canonical"];
    for (const std::string& phrase : QueryLexicon::kCanonicalPhrases) {
        if (!canon.contains(phrase)) {
            fail(ErrorCode::Validation, path.string() + ": missing canonical phrase '" + phrase + "'");
        }
        const std::vector<double> v = vec(canon[phrase], "canonical '" + phrase + "'");
        if (lex.dim == 0) lex.dim = static_cast<int>(v.size());
        lex.set_canonical(phrase, v);
    }
    if (doc.contains("prompts")) {
        if (!doc["prompts"].is_object()) fail(ErrorCode::Validation, path.string() + ": 'prompts' must be an object");
        for (const auto& [name, value] : doc["prompts"].items()) lex.add_prompt(name, vec(value, "prompt '" + name + "'"));
    }
    return lex;
}

void save_lexicon(const std::filesystem::path& path, const QueryLexicon& lexicon) {
    json doc;
    doc["canonical"] = json::object();
    for (std::size_t i = 0; i < 4; ++i) doc["canonical"][QueryLexicon::kCanonicalPhrases[i]] = lexicon.canonical[i];
    doc["prompts"] = json::object();
    for (const auto& [k, v] : lexicon.prompts) doc["prompts"][k] = v;
    const std::string text = doc.dump(2) + "\n";
    write_file_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

double relevancy_from_dots(double text_dot, std::span<const double> canonical_dots) {
    double worst = -std::numeric_limits<double>::infinity();
    for (double b : canonical_dots) worst = std::max(worst, b);
    // exp(a)/(exp(a)+exp(b)) == 1/(1+exp(b-a)); the largest canonical dot gives the minimum.
    return 1.0 / (1.0 + std::exp(worst - text_dot));
}

double relevancy_score(std::span<const double> img, std::span<const double> text,
                       const std::array<std::vector<double>, 4>& canonical) {
    std::array<double, 4> dots{};
    for (std::size_t i = 0; i < 4; ++i) dots[i] = dot(img, canonical[i]);
    return relevancy_from_dots(dot(img, text), dots);
}

double QueryResult::min_score() const {
    return relevancy.empty() ? 0.0 : *std::min_element(relevancy.begin(), relevancy.end());
}
double QueryResult::max_score() const {
    return relevancy.empty() ? 0.0 : *std::max_element(relevancy.begin(), relevancy.end());
}
double QueryResult::mean_score() const {
    return relevancy.empty() ? 0.0 : std::accumulate(relevancy.begin(), relevancy.end(), 0.0) / relevancy.size();
}
double QueryResult::coverage() const {
    if (mask.empty()) return 0.0;
    return static_cast<double>(std::count(mask.begin(), mask.end(), std::uint8_t{1})) / mask.size();
}

QueryResult score_feature_map(const FeatureCodec& codec, std::span<const double> feature, int width, int height,
                              std::span<const double> text, const std::array<std::vector<double>, 4>& canonical,
                              double threshold) {
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    if (feature.size() != pixels * codec.compressed_dim) {
        fail(ErrorCode::ShapeMismatch, "feature map does not match the codec's compressed dimension");
    }
    if (static_cast<int>(text.size()) != codec.full_dim) {
        fail(ErrorCode::ShapeMismatch, "text embedding does not match the codec's full dimension");
    }
    if (!std::isfinite(threshold)) fail(ErrorCode::InvalidArgument, "threshold must be finite");
    const std::vector<double> decoded = codec.decode(feature, pixels);
    QueryResult r;
    r.width = width;
    r.height = height;
    r.threshold = threshold;
    r.relevancy.resize(pixels);
    r.mask.resize(pixels);
    const std::size_t df = static_cast<std::size_t>(codec.full_dim);
    for (std::size_t p = 0; p < pixels; ++p) {
        const std::span<const double> img(decoded.data() + p * df, df);
        r.relevancy[p] = relevancy_score(img, text, canonical);
        r.mask[p] = r.relevancy[p] >= threshold ? 1 : 0;
    }
    return r;
}

QueryEngine::QueryEngine(SceneModel model, FeatureCodec codec, QueryLexicon lexicon, Camera camera,
                         RasterSettings settings)
    : model_(std::move(model)),
      codec_(std::move(codec)),
      lexicon_(std::move(lexicon)),
      camera_(camera),
      settings_(std::move(settings)) {
    model_.check_shapes();
    codec_.check_shapes();
    camera_.validate();
    if (codec_.compressed_dim != model_.cloud.feature_dim) {
        fail(ErrorCode::ShapeMismatch, "codec compressed dimension does not match the checkpoint feature dimension");
    }
    if (lexicon_.dim != codec_.full_dim) {
        fail(ErrorCode::ShapeMismatch, "lexicon embedding dimension does not match the codec");
    }
}

std::vector<double> QueryEngine::resolve(const QueryRequest& request) const {
    if (request.embedding) return normalized(*request.embedding, lexicon_.dim, "query embedding");
    if (const std::vector<double>* e = lexicon_.find(request.prompt)) return *e;
    throw UnknownPromptError(request.prompt, lexicon_.nearest_keys(request.prompt));
}

RenderOutput QueryEngine::render(double time, const std::optional<Camera>& camera) const {
    return render_model(model_, camera ? *camera : camera_, time, settings_).output;
}

QueryResult QueryEngine::query(const QueryRequest& request) const {
    const std::vector<double> text = resolve(request);
    const RenderOutput out = render(request.time, request.camera);
    QueryResult r = score_feature_map(codec_, out.feature, out.width, out.height, text, lexicon_.canonical,
                                      request.threshold);
    r.prompt = request.prompt;
    return r;
}

}  // namespace semsplat
