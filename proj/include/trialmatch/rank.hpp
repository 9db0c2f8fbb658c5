#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialmatch/corpus.hpp"
#include "trialmatch/hnsw.hpp"
#include "trialmatch/inference.hpp"
#include "trialmatch/lexical_index.hpp"
#include "trialmatch/patient.hpp"
#include "trialmatch/retrieve.hpp"

namespace trialmatch {

// ---- relevance judging -----------------------------------------------------

/// Patient side of a judge call: the text plus its linked concepts.
struct PatientStatement {
    std::string text;
    std::set<std::string> concepts;
};

struct CriterionRelevance {
    std::string criterion_id;
    std::string trial_id;
    double relevance = 0.0;
    bool flagged = false;  // backend gave no usable answer

    friend bool operator==(const CriterionRelevance&, const CriterionRelevance&) = default;
};

class RelevanceJudge {
public:
    virtual ~RelevanceJudge() = default;
    virtual CriterionRelevance judge(const PatientStatement& statement, const Criterion& criterion) const = 0;
};

/// Yes -> 1, No -> 0, or the backend's P(Yes) when reported. Anything else is
/// retried `parse_retries` times and then scored 0 with the flag set.
class LlmJudge final : public RelevanceJudge {
public:
    explicit LlmJudge(std::shared_ptr<const ChatClient> client, int parse_retries = 2, RetryPolicy transport = {});
    CriterionRelevance judge(const PatientStatement& statement, const Criterion& criterion) const override;

private:
    std::shared_ptr<const ChatClient> client_;
    int parse_retries_;
    RetryPolicy transport_;
};

/// "Yes"/"No" with surrounding quotes, punctuation and case ignored.
std::optional<bool> parse_yes_no(std::string_view completion);

// ---- aggregation and reranking ---------------------------------------------

enum class AggregationStrategy { Max, Mean, SqrtNorm, LogNorm, Weighted };

std::string_view to_string(AggregationStrategy s);
AggregationStrategy parse_aggregation_strategy(std::string_view name);

inline constexpr double kWeightedSqrt = 0.7;
inline constexpr double kWeightedMax = 0.3;

/// Empty input aggregates to 0 under every strategy.
double aggregate(std::span<const double> scores, AggregationStrategy strategy);

struct RerankConfig {
    AggregationStrategy strategy = AggregationStrategy::Weighted;
    double beta = 0.7;
    std::size_t criteria_per_patient = 30;  // m
    std::size_t per_trial_cap = 10;
    double alpha = 0.5;
    FusionMode fusion = FusionMode::MinMax;
    std::size_t k_arm = 1000;
    std::size_t parallelism = 4;
};

struct RerankedTrial {
    std::string trial_id;
    double fused_score = 0.0;
    double aggregate = 0.0;
    double agg_norm = 0.0;
    double rerank_score = 0.0;
    std::vector<CriterionRelevance> judged;
};

/// Criterion-level hybrid search over the candidates' criteria, top m with a
/// per-trial cap, each pair judged, aggregated per trial, then blended with
/// the retrieval score. Sorted by rerank_score desc, trial_id asc.
std::vector<RerankedTrial> rerank_candidates(const PatientStatement& statement, const QueryBundle& bundle,
                                             const std::vector<RetrievalHit>& candidates,
                                             const std::unordered_map<std::string, const Criterion*>& criteria,
                                             const LexicalIndex& criterion_lexical,
                                             const HnswIndex& criterion_vectors, const RelevanceJudge& judge,
                                             const RerankConfig& config);

// ---- eligibility ----------------------------------------------------------

enum class Classification { Met, NotMet, Violated, NotViolated, Unclear, Irrelevant };
enum class FinalDecision { Eligible, LikelyEligible, LikelyIneligible, Ineligible };

std::string_view to_string(Classification c);  // "MET", "NOT_MET", ...
std::string_view display_name(Classification c);  // "Met", "Not Met", ... as the prompt spells them
std::optional<Classification> parse_classification(std::string_view s, CriterionKind kind);
std::string_view to_string(FinalDecision d);
std::string_view display_name(FinalDecision d);
std::optional<FinalDecision> parse_final_decision(std::string_view s);

struct CriterionVerdict {
    std::string criterion_id;
    CriterionKind kind = CriterionKind::Inclusion;
    Classification classification = Classification::Unclear;
    std::string justification;

    friend bool operator==(const CriterionVerdict&, const CriterionVerdict&) = default;
};

struct CompositeScore {
    double s_inc = 0.0;
    double s_exc = 0.0;
    double s = 0.0;
    std::size_t n = 0;  // decisive inclusion verdicts
    std::size_t m = 0;  // decisive exclusion verdicts

    friend bool operator==(const CompositeScore&, const CompositeScore&) = default;
};

/// w = +1 for MET / NOT_VIOLATED, -1 for NOT_MET / VIOLATED; UNCLEAR and
/// IRRELEVANT are left out. An empty side drops out of the average.
CompositeScore compute_composite(std::span<const CriterionVerdict> verdicts);

struct EligibilityAssessment {
    std::string trial_id;
    std::string patient_id;
    std::vector<CriterionVerdict> verdicts;  // trial criterion order
    std::string recap;
    std::optional<FinalDecision> final_decision;
    CompositeScore scores;
    bool degraded = false;
    std::vector<std::string> diagnostics;
};

/// Everything a reasoner backend may look at for one (patient, trial) pair.
struct ReasoningInput {
    const PatientProfile& profile;
    const Trial& trial;
    std::string criteria_block;  // "Inclusion Criteria:\n- ..." as sent in the prompt
    std::string patient_block;
};

class Reasoner {
public:
    virtual ~Reasoner() = default;
    /// Completion text expected to carry the eligibility JSON object.
    virtual std::string reason(const ReasoningInput& input) const = 0;
};

class LlmReasoner final : public Reasoner {
public:
    explicit LlmReasoner(std::shared_ptr<const ChatClient> client, RetryPolicy transport = {}, int max_tokens = 4096);
    std::string reason(const ReasoningInput& input) const override;

    /// The user message sent for this input (the filled template).
    static std::string render_prompt(const ReasoningInput& input);

private:
    std::shared_ptr<const ChatClient> client_;
    RetryPolicy transport_;
    int max_tokens_;
};

/// Cleaned criterion texts under "Inclusion Criteria:" / "Exclusion
/// Criteria:" headers, "- " bullets, two spaces per indent level.
std::string render_criteria_block(const Trial& trial);

/// Narrative, then bundle sentences not already in it, then the trial's
/// criteria judged relevant; cut to `token_budget` whitespace tokens.
std::string render_patient_block(const PatientProfile& profile, const QueryBundle& bundle,
                                 std::span<const std::string> context_statements, std::size_t token_budget);

struct ParsedResponse {
    std::vector<CriterionVerdict> verdicts;  // one per trial criterion
    std::string recap;
    std::optional<FinalDecision> final_decision;
    std::vector<std::string> diagnostics;
};

/// Validates the eligibility JSON and maps each returned item to a trial
/// criterion: exact cleaned text first, else the best token-set overlap
/// >= 0.8 within the same kind, else dropped with a diagnostic. nullopt when
/// the completion holds no object with both evaluation arrays.
std::optional<ParsedResponse> parse_reasoner_response(std::string_view completion, const Trial& trial);

inline constexpr double kCriterionMatchThreshold = 0.8;

/// |A ∩ B| / max(|A|, |B|) over lexical token sets; 0 when both are empty.
double token_overlap(std::string_view a, std::string_view b);

struct AssessConfig {
    int retries = 2;  // attempts = retries + 1
    std::size_t context_token_budget = 2000;
};

/// Asks the reasoner until the response parses; after the last failed
/// attempt every verdict is UNCLEAR and the assessment is degraded.
/// Transport failures surface as ReasonerUnavailable.
EligibilityAssessment assess_eligibility(const PatientProfile& profile, const QueryBundle& bundle,
                                         const Trial& trial, const Reasoner& reasoner,
                                         std::span<const std::string> context_statements,
                                         const AssessConfig& config = {});

struct RankedTrial {
    std::string trial_id;
    double s_composite = 0.0;
    double rerank_score = 0.0;
    bool assessed = false;

    friend bool operator==(const RankedTrial&, const RankedTrial&) = default;
};

/// Assessed trials by S desc, rerank desc, id asc; unassessed ones follow in
/// their given order.
std::vector<RankedTrial> final_rank(std::vector<RankedTrial> trials);

nlohmann::ordered_json to_json(const CriterionVerdict& v);
nlohmann::ordered_json to_json(const EligibilityAssessment& a);

}  // namespace trialmatch
