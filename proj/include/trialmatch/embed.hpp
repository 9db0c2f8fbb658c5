#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trialmatch/inference.hpp"

namespace trialmatch {

using Vector = std::vector<float>;

/// Text -> unit-normalized dense vector of a fixed dimension. Implementations
/// must be deterministic and safe for concurrent calls.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual Vector embed(std::string_view text) const = 0;
    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const;
    virtual std::string backend() const = 0;
};

/// Signed feature hashing of token unigrams and bigrams, L2-normalized.
class MockEmbedder final : public Embedder {
public:
    explicit MockEmbedder(std::size_t dimension, std::uint64_t seed = 0x5eed, std::size_t max_tokens = 8000);

    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) const override;
    std::string backend() const override { return "mock"; }

private:
    std::size_t dimension_;
    std::uint64_t seed_;
    std::size_t max_tokens_;
};

/// POST {"texts": [...]} -> {"vectors": [[...]]}.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(Endpoint endpoint, std::size_t dimension, RetryPolicy policy = {}, std::size_t max_tokens = 8000);

    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;
    std::string backend() const override { return "http"; }

private:
    Endpoint endpoint_;
    std::size_t dimension_;
    RetryPolicy policy_;
    std::size_t max_tokens_;
};

void l2_normalize(Vector& v);
// Four partial sums keep the hot loop in HNSW walks pipelined.
inline double dot(std::span<const float> a, std::span<const float> b) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    const std::size_t n = a.size();
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * b[i];
        s1 += static_cast<double>(a[i + 1]) * b[i + 1];
        s2 += static_cast<double>(a[i + 2]) * b[i + 2];
        s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    }
    for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
    return (s0 + s1) + (s2 + s3);
}
double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace trialmatch
