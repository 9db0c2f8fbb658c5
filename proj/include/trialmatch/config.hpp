#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "trialmatch/eval.hpp"
#include "trialmatch/hnsw.hpp"
#include "trialmatch/inference.hpp"
#include "trialmatch/rank.hpp"
#include "trialmatch/retrieve.hpp"

namespace trialmatch {

struct PathsConfig {
    std::string corpus_dir;
    std::string dictionary;
    std::string index_dir;
    std::string output_dir;
    std::string mock_rules;

    friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

struct BackendConfig {
    bool mock_llm = false;
    bool mock_embed = false;
    bool llm_augmenter = false;  // query expansion through the LLM; mock otherwise
    std::string llm_url;
    std::string judge_url;      // per-role overrides of llm_url
    std::string reasoner_url;
    std::string augmenter_url;
    std::string embed_url;
    int retries = 2;
    long long initial_backoff_ms = 200;
    long long timeout_ms = 120000;
    std::size_t parallelism = 4;

    RetryPolicy policy() const;
    friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

struct EngineConfig {
    PathsConfig paths;
    RetrievalConfig retrieval;
    AggregationStrategy strategy = AggregationStrategy::Weighted;
    double beta = 0.7;
    std::size_t criteria_per_patient = 30;
    std::size_t per_trial_cap = 10;
    std::size_t top_r = 30;
    int reasoner_retries = 2;
    int judge_retries = 2;
    int augmenter_retries = 2;
    std::size_t context_token_budget = 2000;
    BackendConfig backends;
    std::size_t embedding_dimension = 256;
    std::size_t embed_max_tokens = 8000;
    HnswParams hnsw;
    std::optional<std::chrono::year_month_day> reference_date;
    PrecisionMode precision_mode = PrecisionMode::Standard;

    RerankConfig rerank_config() const;
    AssessConfig assess_config() const;
    /// Throws InvalidArgument on out-of-range values.
    void validate() const;

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

nlohmann::ordered_json to_json(const EngineConfig& config);
/// Missing keys keep their defaults. Throws MalformedJson / InvalidArgument.
EngineConfig config_from_json(const nlohmann::json& j);
EngineConfig load_config(std::string_view json_text);

/// TRIALMATCH_LLM_URL and TRIALMATCH_EMBED_URL, when set, replace the
/// configured URLs.
void apply_environment(EngineConfig& config);

}  // namespace trialmatch
