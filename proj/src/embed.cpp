#include "trialmatch/embed.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

std::vector<Vector> Embedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

void l2_normalize(Vector& v) {
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (auto& x : v) x = static_cast<float>(x / norm);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // splitmix64 finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

}  // namespace

MockEmbedder::MockEmbedder(std::size_t dimension, std::uint64_t seed, std::size_t max_tokens)
    : dimension_(dimension), seed_(seed), max_tokens_(max_tokens) {
    if (dimension_ == 0) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
}

Vector MockEmbedder::embed(std::string_view text) const {
    const auto tokens = text::lexical_tokens(text);
    if (tokens.size() > max_tokens_) {
        throw Error(Errc::TextTooLong, std::to_string(tokens.size()) + " tokens exceeds limit " + std::to_string(max_tokens_));
    }
    Vector v(dimension_, 0.0f);
    auto add = [&](const std::string& feature) {
        const auto h = fnv1a(feature, seed_);
        const auto bucket = static_cast<std::size_t>(h % dimension_);
        v[bucket] += (h >> 63) ? -1.0f : 1.0f;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add("u:" + tokens[i]);
        if (i + 1 < tokens.size()) add("b:" + tokens[i] + " " + tokens[i + 1]);
    }
    l2_normalize(v);
    bool zero = true;
    for (float x : v) zero = zero && x == 0.0f;
    if (zero) v[0] = 1.0f;  // empty text (or exact cancellation) maps to e0
    return v;
}

HttpEmbedder::HttpEmbedder(Endpoint endpoint, std::size_t dimension, RetryPolicy policy, std::size_t max_tokens)
    : endpoint_(std::move(endpoint)), dimension_(dimension), policy_(policy), max_tokens_(max_tokens) {}

Vector HttpEmbedder::embed(std::string_view text) const {
    const std::string t(text);
    return embed_batch(std::span<const std::string>(&t, 1)).front();
}

std::vector<Vector> HttpEmbedder::embed_batch(std::span<const std::string> texts) const {
    for (const auto& t : texts) {
        if (text::lexical_tokens(t).size() > max_tokens_) throw Error(Errc::TextTooLong, "embedding input exceeds token limit");
    }
    nlohmann::json body{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto response = post_json(endpoint_, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), policy_);
    const auto parsed = nlohmann::json::parse(response, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("vectors") || !parsed["vectors"].is_array()) {
        throw Error(Errc::BackendUnavailable, "embedding backend returned no \"vectors\" array");
    }
    const auto& vectors = parsed["vectors"];
    if (vectors.size() != texts.size()) {
        throw Error(Errc::BackendUnavailable, "embedding backend returned " + std::to_string(vectors.size()) +
                                                  " vectors for " + std::to_string(texts.size()) + " texts");
    }
    std::vector<Vector> out;
    for (const auto& v : vectors) {
        auto vec = v.get<Vector>();
        if (vec.size() != dimension_) {
            throw Error(Errc::DimensionMismatch, "embedding backend returned dimension " + std::to_string(vec.size()) +
                                                     ", expected " + std::to_string(dimension_));
        }
        l2_normalize(vec);
        out.push_back(std::move(vec));
    }
    return out;
}

}  // namespace trialmatch
