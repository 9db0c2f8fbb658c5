#include "trialmatch/config.hpp"

#include <cstdio>
#include <cstdlib>

#include "trialmatch/error.hpp"

namespace trialmatch {

RetryPolicy BackendConfig::policy() const {
    RetryPolicy p;
    p.retries = retries;
    p.initial_backoff = std::chrono::milliseconds(initial_backoff_ms);
    p.timeout = std::chrono::milliseconds(timeout_ms);
    return p;
}

RerankConfig EngineConfig::rerank_config() const {
    RerankConfig r;
    r.strategy = strategy;
    r.beta = beta;
    r.criteria_per_patient = criteria_per_patient;
    r.per_trial_cap = per_trial_cap;
    r.alpha = retrieval.alpha;
    r.fusion = retrieval.fusion;
    r.k_arm = retrieval.k_arm;
    r.parallelism = backends.parallelism;
    return r;
}

AssessConfig EngineConfig::assess_config() const {
    AssessConfig a;
    a.retries = reasoner_retries;
    a.context_token_budget = context_token_budget;
    return a;
}

void EngineConfig::validate() const {
    retrieval.validate();
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidArgument, "config: " + what); };
    if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]");
    if (top_r == 0) fail("top_r must be >= 1");
    if (per_trial_cap == 0) fail("per_trial_cap must be >= 1");
    if (reasoner_retries < 0 || judge_retries < 0 || augmenter_retries < 0 || backends.retries < 0) {
        fail("retry budgets must be >= 0");
    }
    if (embedding_dimension == 0) fail("embedding_dimension must be >= 1");
    if (hnsw.M < 2 || hnsw.ef_construction == 0 || hnsw.ef_search == 0) fail("bad hnsw parameters");
}

namespace {

std::string date_string(const std::optional<std::chrono::year_month_day>& d) {
    if (!d) return {};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d->year()), static_cast<unsigned>(d->month()),
                  static_cast<unsigned>(d->day()));
    return buf;
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

}  // namespace

nlohmann::ordered_json to_json(const EngineConfig& c) {
    nlohmann::ordered_json j;
    j["paths"] = {{"corpus_dir", c.paths.corpus_dir},
                  {"dictionary", c.paths.dictionary},
                  {"index_dir", c.paths.index_dir},
                  {"output_dir", c.paths.output_dir},
                  {"mock_rules", c.paths.mock_rules}};
    j["retrieval"] = {{"k_candidates", c.retrieval.k_candidates},
                      {"alpha", c.retrieval.alpha},
                      {"k_arm", c.retrieval.k_arm},
                      {"filter_age", c.retrieval.filter_age},
                      {"filter_sex", c.retrieval.filter_sex},
                      {"filter_status", c.retrieval.filter_status},
                      {"filter_location", c.retrieval.filter_location},
                      {"fusion", to_string(c.retrieval.fusion)},
                      {"lexical_arm", c.retrieval.lexical_arm},
                      {"semantic_arm", c.retrieval.semantic_arm}};
    j["rank"] = {{"strategy", to_string(c.strategy)},
                 {"beta", c.beta},
                 {"criteria_per_patient", c.criteria_per_patient},
                 {"per_trial_cap", c.per_trial_cap},
                 {"top_r", c.top_r},
                 {"reasoner_retries", c.reasoner_retries},
                 {"judge_retries", c.judge_retries},
                 {"context_token_budget", c.context_token_budget}};
    j["patient"] = {{"augmenter_retries", c.augmenter_retries}, {"reference_date", date_string(c.reference_date)}};
    j["backends"] = {{"mock_llm", c.backends.mock_llm},
                     {"mock_embed", c.backends.mock_embed},
                     {"llm_augmenter", c.backends.llm_augmenter},
                     {"llm_url", c.backends.llm_url},
                     {"judge_url", c.backends.judge_url},
                     {"reasoner_url", c.backends.reasoner_url},
                     {"augmenter_url", c.backends.augmenter_url},
                     {"embed_url", c.backends.embed_url},
                     {"retries", c.backends.retries},
                     {"initial_backoff_ms", c.backends.initial_backoff_ms},
                     {"timeout_ms", c.backends.timeout_ms},
                     {"parallelism", c.backends.parallelism}};
    j["index"] = {{"embedding_dimension", c.embedding_dimension},
                  {"embed_max_tokens", c.embed_max_tokens},
                  {"hnsw_M", c.hnsw.M},
                  {"hnsw_ef_construction", c.hnsw.ef_construction},
                  {"hnsw_ef_search", c.hnsw.ef_search},
                  {"hnsw_seed", c.hnsw.seed}};
    j["eval"] = {{"precision_mode", c.precision_mode == PrecisionMode::Standard ? "standard" : "half_k"}};
    return j;
}

EngineConfig config_from_json(const nlohmann::json& j) {
    EngineConfig c;
    try {
        if (!j.is_object()) throw Error(Errc::MalformedJson, "config must be a JSON object");
        const auto section = [&](const char* name) {
            return j.contains(name) && j[name].is_object() ? j[name] : nlohmann::json::object();
        };
        const auto p = section("paths");
        read(p, "corpus_dir", c.paths.corpus_dir);
        read(p, "dictionary", c.paths.dictionary);
        read(p, "index_dir", c.paths.index_dir);
        read(p, "output_dir", c.paths.output_dir);
        read(p, "mock_rules", c.paths.mock_rules);

        const auto r = section("retrieval");
        read(r, "k_candidates", c.retrieval.k_candidates);
        read(r, "alpha", c.retrieval.alpha);
        read(r, "k_arm", c.retrieval.k_arm);
        read(r, "filter_age", c.retrieval.filter_age);
        read(r, "filter_sex", c.retrieval.filter_sex);
        read(r, "filter_status", c.retrieval.filter_status);
        read(r, "filter_location", c.retrieval.filter_location);
        if (r.contains("fusion")) c.retrieval.fusion = parse_fusion_mode(r["fusion"].get<std::string>());
        read(r, "lexical_arm", c.retrieval.lexical_arm);
        read(r, "semantic_arm", c.retrieval.semantic_arm);

        const auto k = section("rank");
        if (k.contains("strategy")) c.strategy = parse_aggregation_strategy(k["strategy"].get<std::string>());
        read(k, "beta", c.beta);
        read(k, "criteria_per_patient", c.criteria_per_patient);
        read(k, "per_trial_cap", c.per_trial_cap);
        read(k, "top_r", c.top_r);
        read(k, "reasoner_retries", c.reasoner_retries);
        read(k, "judge_retries", c.judge_retries);
        read(k, "context_token_budget", c.context_token_budget);

        const auto pt = section("patient");
        read(pt, "augmenter_retries", c.augmenter_retries);
        if (pt.contains("reference_date") && pt["reference_date"].is_string() &&
            !pt["reference_date"].get<std::string>().empty()) {
            c.reference_date = parse_registry_date(pt["reference_date"].get<std::string>());
            if (!c.reference_date) throw Error(Errc::InvalidArgument, "config: bad reference_date");
        }

        const auto b = section("backends");
        read(b, "mock_llm", c.backends.mock_llm);
        read(b, "mock_embed", c.backends.mock_embed);
        read(b, "llm_augmenter", c.backends.llm_augmenter);
        read(b, "llm_url", c.backends.llm_url);
        read(b, "judge_url", c.backends.judge_url);
        read(b, "reasoner_url", c.backends.reasoner_url);
        read(b, "augmenter_url", c.backends.augmenter_url);
        read(b, "embed_url", c.backends.embed_url);
        read(b, "retries", c.backends.retries);
        read(b, "initial_backoff_ms", c.backends.initial_backoff_ms);
        read(b, "timeout_ms", c.backends.timeout_ms);
        read(b, "parallelism", c.backends.parallelism);

        const auto ix = section("index");
        read(ix, "embedding_dimension", c.embedding_dimension);
        read(ix, "embed_max_tokens", c.embed_max_tokens);
        read(ix, "hnsw_M", c.hnsw.M);
        read(ix, "hnsw_ef_construction", c.hnsw.ef_construction);
        read(ix, "hnsw_ef_search", c.hnsw.ef_search);
        read(ix, "hnsw_seed", c.hnsw.seed);

        const auto ev = section("eval");
        if (ev.contains("precision_mode")) {
            const auto mode = ev["precision_mode"].get<std::string>();
            if (mode == "standard") c.precision_mode = PrecisionMode::Standard;
            else if (mode == "half_k") c.precision_mode = PrecisionMode::HalfK;
            else throw Error(Errc::InvalidArgument, "config: precision_mode must be standard or half_k");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedJson, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

EngineConfig load_config(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::MalformedJson, std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

void apply_environment(EngineConfig& config) {
    if (const char* llm = std::getenv("TRIALMATCH_LLM_URL"); llm && *llm) config.backends.llm_url = llm;
    if (const char* embed = std::getenv("TRIALMATCH_EMBED_URL"); embed && *embed) config.backends.embed_url = embed;
}

}  // namespace trialmatch
