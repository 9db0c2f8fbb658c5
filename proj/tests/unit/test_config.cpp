#include <gtest/gtest.h>

#include <cstdlib>

#include "trialmatch/config.hpp"
#include "trialmatch/error.hpp"

using namespace trialmatch;

TEST(Config, DefaultsRoundTrip) {
    const EngineConfig c;
    EXPECT_EQ(c.retrieval.k_candidates, 500u);
    EXPECT_DOUBLE_EQ(c.retrieval.alpha, 0.5);
    EXPECT_DOUBLE_EQ(c.beta, 0.7);
    EXPECT_EQ(c.top_r, 30u);
    EXPECT_EQ(c.strategy, AggregationStrategy::Weighted);
    EXPECT_EQ(c.hnsw.M, 16u);
    EXPECT_EQ(c.hnsw.ef_construction, 200u);
    EXPECT_EQ(c.hnsw.ef_search, 100u);
    EXPECT_EQ(config_from_json(nlohmann::json::parse(to_json(c).dump())), c);
}

TEST(Config, EveryFieldRoundTrips) {
    EngineConfig c;
    c.paths = {"corpus", "dict.jsonl", "idx", "out", "rules.json"};
    c.retrieval.k_candidates = 50;
    c.retrieval.alpha = 0.25;
    c.retrieval.k_arm = 400;
    c.retrieval.filter_location = true;
    c.retrieval.filter_sex = false;
    c.retrieval.fusion = FusionMode::ReciprocalRank;
    c.strategy = AggregationStrategy::LogNorm;
    c.beta = 0.4;
    c.criteria_per_patient = 12;
    c.per_trial_cap = 3;
    c.top_r = 7;
    c.reasoner_retries = 0;
    c.judge_retries = 1;
    c.augmenter_retries = 3;
    c.context_token_budget = 99;
    c.backends.mock_llm = true;
    c.backends.llm_augmenter = true;
    c.backends.llm_url = "http://a:1/x";
    c.backends.judge_url = "http://b:2/y";
    c.backends.embed_url = "http://c:3/z";
    c.backends.retries = 5;
    c.backends.timeout_ms = 1234;
    c.backends.parallelism = 2;
    c.embedding_dimension = 64;
    c.hnsw.M = 8;
    c.hnsw.seed = 7;
    c.reference_date = std::chrono::year_month_day{std::chrono::year{2024}, std::chrono::month{3}, std::chrono::day{1}};
    c.precision_mode = PrecisionMode::HalfK;
    const auto text = to_json(c).dump(2);
    const auto back = load_config(text);
    EXPECT_EQ(back, c);
    EXPECT_EQ(to_json(back).dump(2), text);
}

TEST(Config, PartialDocumentKeepsDefaults) {
    const auto c = load_config(R"({"rank": {"top_r": 5}, "retrieval": {"alpha": 0.9}})");
    EXPECT_EQ(c.top_r, 5u);
    EXPECT_DOUBLE_EQ(c.retrieval.alpha, 0.9);
    EXPECT_EQ(c.retrieval.k_candidates, 500u);
    EXPECT_DOUBLE_EQ(c.beta, 0.7);
}

TEST(Config, Validation) {
    EXPECT_THROW(load_config("{not json"), Error);
    EXPECT_THROW(load_config(R"({"rank": {"beta": 2}})"), Error);
    EXPECT_THROW(load_config(R"({"rank": {"top_r": 0}})"), Error);
    EXPECT_THROW(load_config(R"({"retrieval": {"k_candidates": 5000}})"), Error);
    EXPECT_THROW(load_config(R"({"rank": {"strategy": "median"}})"), Error);
}

TEST(Config, EnvironmentOverridesUrls) {
    EngineConfig c;
    c.backends.llm_url = "http://from-config/x";
    ::setenv("TRIALMATCH_LLM_URL", "http://from-env:9/v1", 1);
    ::unsetenv("TRIALMATCH_EMBED_URL");
    apply_environment(c);
    EXPECT_EQ(c.backends.llm_url, "http://from-env:9/v1");
    EXPECT_EQ(c.backends.embed_url, "");
    ::unsetenv("TRIALMATCH_LLM_URL");
}

TEST(Config, DerivedStageConfigs) {
    EngineConfig c;
    c.beta = 0.3;
    c.per_trial_cap = 4;
    c.reasoner_retries = 1;
    EXPECT_DOUBLE_EQ(c.rerank_config().beta, 0.3);
    EXPECT_EQ(c.rerank_config().per_trial_cap, 4u);
    EXPECT_EQ(c.assess_config().retries, 1);
}
