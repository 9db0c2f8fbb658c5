#include <gtest/gtest.h>

#include <cmath>

#include "trialmatch/embed.hpp"

using namespace trialmatch;

TEST(MockEmbedder, DeterministicUnitVectors) {
    const MockEmbedder e(64);
    const auto a = e.embed("breast carcinoma");
    EXPECT_EQ(a, e.embed("breast carcinoma"));
    EXPECT_EQ(a, MockEmbedder(64).embed("breast carcinoma"));
    EXPECT_EQ(a.size(), 64u);
    EXPECT_NEAR(dot(a, a), 1.0, 1e-6);
}

TEST(MockEmbedder, RelatedTextIsCloser) {
    const MockEmbedder e(256);
    const auto base = e.embed("breast carcinoma");
    const double near = cosine_similarity(base, e.embed("breast carcinoma metastatic"));
    const double far = cosine_similarity(base, e.embed("renal transplant rejection"));
    EXPECT_GT(near, far);
}

TEST(MockEmbedder, BatchEqualsSingle) {
    const MockEmbedder e(32);
    const std::vector<std::string> texts{"a b c", "", "her2-positive disease"};
    const auto batch = e.embed_batch(texts);
    ASSERT_EQ(batch.size(), 3u);
    for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(batch[i], e.embed(texts[i]));
}

TEST(Vectors, NormalizeAndCosine) {
    Vector v{3.0f, 4.0f};
    l2_normalize(v);
    EXPECT_NEAR(v[0], 0.6f, 1e-6);
    EXPECT_NEAR(v[1], 0.8f, 1e-6);
    Vector zero{0.0f, 0.0f};
    l2_normalize(zero);
    EXPECT_EQ(zero, (Vector{0.0f, 0.0f}));
    EXPECT_NEAR(cosine_similarity(Vector{1, 0}, Vector{0, 2}), 0.0, 1e-12);
}
