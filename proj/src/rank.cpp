#include "trialmatch/rank.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "trialmatch/error.hpp"
#include "trialmatch/parallel.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

// ---- judging ----------------------------------------------------------------

std::optional<bool> parse_yes_no(std::string_view completion) {
    std::string word;
    for (char ch : completion) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else if (!word.empty()) {
            break;
        }
    }
    if (word == "yes") return true;
    if (word == "no") return false;
    return std::nullopt;
}

LlmJudge::LlmJudge(std::shared_ptr<const ChatClient> client, int parse_retries, RetryPolicy transport)
    : client_(std::move(client)), parse_retries_(parse_retries), transport_(transport) {}

CriterionRelevance LlmJudge::judge(const PatientStatement& statement, const Criterion& criterion) const {
    InferenceRequest request;
    request.messages = {{"user", prompts::render(prompts::relevance_judge(), {{"patient_text", statement.text},
                                                                              {"criterion_text", criterion.text}})}};
    request.max_tokens = 8;
    request.policy = transport_;

    CriterionRelevance out{criterion.criterion_id, criterion.trial_id, 0.0, false};
    for (int attempt = 0; attempt <= parse_retries_; ++attempt) {
        Completion completion;
        try {
            completion = client_->complete(request);
        } catch (const Error& e) {
            if (e.code() == Errc::BackendUnavailable || e.code() == Errc::Timeout) {
                throw Error(Errc::JudgeUnavailable, std::string("relevance judge: ") + e.what());
            }
            throw;
        }
        if (completion.yes_probability) {
            out.relevance = std::clamp(*completion.yes_probability, 0.0, 1.0);
            return out;
        }
        if (auto yes = parse_yes_no(completion.text)) {
            out.relevance = *yes ? 1.0 : 0.0;
            return out;
        }
    }
    out.flagged = true;
    return out;
}

// ---- aggregation ----------------------------------------------------------

std::string_view to_string(AggregationStrategy s) {
    switch (s) {
        case AggregationStrategy::Max: return "MAX";
        case AggregationStrategy::Mean: return "MEAN";
        case AggregationStrategy::SqrtNorm: return "SQRT_NORM";
        case AggregationStrategy::LogNorm: return "LOG_NORM";
        case AggregationStrategy::Weighted: break;
    }
    return "WEIGHTED";
}

AggregationStrategy parse_aggregation_strategy(std::string_view name) {
    std::string key;
    for (char c : name) key.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    for (auto s : {AggregationStrategy::Max, AggregationStrategy::Mean, AggregationStrategy::SqrtNorm,
                   AggregationStrategy::LogNorm, AggregationStrategy::Weighted}) {
        if (key == to_string(s)) return s;
    }
    throw Error(Errc::InvalidArgument, "unknown aggregation strategy: " + std::string(name));
}

double aggregate(std::span<const double> scores, AggregationStrategy strategy) {
    if (scores.empty()) return 0.0;
    double sum = 0.0;
    double mx = scores.front();
    for (double s : scores) {
        sum += s;
        mx = std::max(mx, s);
    }
    const double n = static_cast<double>(scores.size());
    const double sqrt_norm = sum / std::sqrt(n);
    switch (strategy) {
        case AggregationStrategy::Max: return mx;
        case AggregationStrategy::Mean: return sum / n;
        case AggregationStrategy::SqrtNorm: return sqrt_norm;
        case AggregationStrategy::LogNorm: return sum / std::log(1.0 + n);
        case AggregationStrategy::Weighted: break;
    }
    return kWeightedSqrt * sqrt_norm + kWeightedMax * mx;
}

std::vector<RerankedTrial> rerank_candidates(const PatientStatement& statement, const QueryBundle& bundle,
                                             const std::vector<RetrievalHit>& candidates,
                                             const std::unordered_map<std::string, const Criterion*>& criteria,
                                             const LexicalIndex& criterion_lexical,
                                             const HnswIndex& criterion_vectors, const RelevanceJudge& judge,
                                             const RerankConfig& config) {
    if (candidates.empty()) return {};

    std::unordered_set<std::string> candidate_ids;
    for (const auto& c : candidates) candidate_ids.insert(c.trial_id);
    IdFilter allowed;
    for (const auto& [id, c] : criteria) {
        if (candidate_ids.contains(c->trial_id)) allowed.insert(id);
    }

    // (1) criterion-level hybrid search, top m with a per-trial cap
    std::vector<const Criterion*> selected;
    if (!allowed.empty() && config.criteria_per_patient > 0) {
        const auto terms = bundle.lexical_terms();
        std::vector<ScoredDoc> lex;
        if (!terms.empty()) lex = criterion_lexical.topk(terms, config.k_arm, &allowed);
        std::vector<ScoredDoc> sem;
        if (!bundle.query_vectors.empty()) {
            sem = semantic_arm(bundle.query_vectors, criterion_vectors, config.k_arm, &allowed);
        }
        std::map<std::string, std::size_t> per_trial;
        for (const auto& hit : fuse_arms(lex, sem, config.alpha, config.fusion)) {
            if (selected.size() >= config.criteria_per_patient) break;
            const Criterion* c = criteria.at(hit.trial_id);
            auto& count = per_trial[c->trial_id];
            if (count >= config.per_trial_cap) continue;
            ++count;
            selected.push_back(c);
        }
    }

    // (2) judge every selected pair
    auto judged = parallel_map<CriterionRelevance>(selected.size(), config.parallelism,
                                                   [&](std::size_t i) { return judge.judge(statement, *selected[i]); });

    // (3) aggregate per trial, (4) blend with the retrieval score
    std::unordered_map<std::string, std::vector<CriterionRelevance>> by_trial;
    for (auto& j : judged) by_trial[j.trial_id].push_back(std::move(j));

    std::vector<RerankedTrial> out;
    out.reserve(candidates.size());
    for (const auto& hit : candidates) {
        RerankedTrial t;
        t.trial_id = hit.trial_id;
        t.fused_score = hit.fused_score;
        if (auto it = by_trial.find(hit.trial_id); it != by_trial.end()) {
            t.judged = std::move(it->second);
            std::vector<double> scores;
            for (const auto& j : t.judged) scores.push_back(j.relevance);
            t.aggregate = aggregate(scores, config.strategy);
        }
        out.push_back(std::move(t));
    }
    double lo = out.front().aggregate;
    double hi = lo;
    for (const auto& t : out) {
        lo = std::min(lo, t.aggregate);
        hi = std::max(hi, t.aggregate);
    }
    for (auto& t : out) {
        // a constant list carries no ordering signal: all 1 if positive, else all 0
        t.agg_norm = hi > lo ? (t.aggregate - lo) / (hi - lo) : (hi > 0.0 ? 1.0 : 0.0);
        t.rerank_score = config.beta * t.agg_norm + (1.0 - config.beta) * t.fused_score;
    }
    std::stable_sort(out.begin(), out.end(), [](const RerankedTrial& a, const RerankedTrial& b) {
        if (a.rerank_score != b.rerank_score) return a.rerank_score > b.rerank_score;
        return a.trial_id < b.trial_id;
    });
    return out;
}

// ---- eligibility ----------------------------------------------------------

std::string_view to_string(Classification c) {
    switch (c) {
        case Classification::Met: return "MET";
        case Classification::NotMet: return "NOT_MET";
        case Classification::Violated: return "VIOLATED";
        case Classification::NotViolated: return "NOT_VIOLATED";
        case Classification::Unclear: return "UNCLEAR";
        case Classification::Irrelevant: break;
    }
    return "IRRELEVANT";
}

std::string_view display_name(Classification c) {
    switch (c) {
        case Classification::Met: return "Met";
        case Classification::NotMet: return "Not Met";
        case Classification::Violated: return "Violated";
        case Classification::NotViolated: return "Not Violated";
        case Classification::Unclear: return "Unclear";
        case Classification::Irrelevant: break;
    }
    return "Irrelevant";
}

namespace {

std::string squash(std::string_view s) {
    std::string key;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c)) key.push_back(static_cast<char>(std::toupper(c)));
    }
    return key;
}

bool decisive(Classification c) { return c != Classification::Unclear && c != Classification::Irrelevant; }

}  // namespace

std::optional<Classification> parse_classification(std::string_view s, CriterionKind kind) {
    const auto key = squash(s);
    if (key == "UNCLEAR") return Classification::Unclear;
    if (key == "IRRELEVANT") return Classification::Irrelevant;
    if (kind == CriterionKind::Inclusion) {
        if (key == "MET") return Classification::Met;
        if (key == "NOTMET") return Classification::NotMet;
    } else {
        if (key == "VIOLATED") return Classification::Violated;
        if (key == "NOTVIOLATED") return Classification::NotViolated;
    }
    return std::nullopt;
}

std::string_view to_string(FinalDecision d) {
    switch (d) {
        case FinalDecision::Eligible: return "ELIGIBLE";
        case FinalDecision::LikelyEligible: return "LIKELY_ELIGIBLE";
        case FinalDecision::LikelyIneligible: return "LIKELY_INELIGIBLE";
        case FinalDecision::Ineligible: break;
    }
    return "INELIGIBLE";
}

std::string_view display_name(FinalDecision d) {
    switch (d) {
        case FinalDecision::Eligible: return "Eligible";
        case FinalDecision::LikelyEligible: return "Likely Eligible";
        case FinalDecision::LikelyIneligible: return "Likely Ineligible";
        case FinalDecision::Ineligible: break;
    }
    return "Ineligible";
}

std::optional<FinalDecision> parse_final_decision(std::string_view s) {
    const auto key = squash(s);
    if (key == "ELIGIBLE") return FinalDecision::Eligible;
    if (key == "LIKELYELIGIBLE") return FinalDecision::LikelyEligible;
    if (key == "LIKELYINELIGIBLE") return FinalDecision::LikelyIneligible;
    if (key == "INELIGIBLE") return FinalDecision::Ineligible;
    return std::nullopt;
}

CompositeScore compute_composite(std::span<const CriterionVerdict> verdicts) {
    CompositeScore out;
    double inc = 0.0;
    double exc = 0.0;
    for (const auto& v : verdicts) {
        switch (v.classification) {
            case Classification::Met: inc += 1.0; ++out.n; break;
            case Classification::NotMet: inc -= 1.0; ++out.n; break;
            case Classification::NotViolated: exc += 1.0; ++out.m; break;
            case Classification::Violated: exc -= 1.0; ++out.m; break;
            case Classification::Unclear:
            case Classification::Irrelevant: break;
        }
    }
    if (out.n > 0) out.s_inc = inc / static_cast<double>(out.n);
    if (out.m > 0) out.s_exc = exc / static_cast<double>(out.m);
    if (out.n > 0 && out.m > 0) {
        out.s = (out.s_inc + out.s_exc) / 2.0;
    } else if (out.n > 0) {
        out.s = out.s_inc;
    } else if (out.m > 0) {
        out.s = out.s_exc;
    }
    return out;
}

std::string render_criteria_block(const Trial& trial) {
    std::string out;
    for (auto kind : {CriterionKind::Inclusion, CriterionKind::Exclusion}) {
        std::string section;
        for (const auto& c : trial.criteria) {
            if (c.kind != kind) continue;
            section.append(2 * c.indent_level, ' ');
            section += "- " + c.text + "\n";
        }
        if (section.empty()) continue;
        if (!out.empty()) out += "\n";
        out += kind == CriterionKind::Inclusion ? "Inclusion Criteria:\n" : "Exclusion Criteria:\n";
        out += section;
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string render_patient_block(const PatientProfile& profile, const QueryBundle& bundle,
                                 std::span<const std::string> context_statements, std::size_t token_budget) {
    std::vector<std::string> parts;
    parts.push_back(profile.narrative);
    std::vector<std::string> extra;
    const auto narrative_key = text::clean_text(profile.narrative);
    for (const auto& s : bundle.expanded_sentences) {
        if (narrative_key.find(text::clean_text(s)) == std::string::npos) extra.push_back(s);
    }
    if (!extra.empty()) {
        parts.push_back("Additional statements:");
        for (auto& s : extra) parts.push_back("- " + s);
    }
    if (!context_statements.empty()) {
        parts.push_back("Relevant trial criteria:");
        for (const auto& s : context_statements) parts.push_back("- " + s);
    }

    std::string out;
    std::size_t used = 0;
    for (const auto& part : parts) {
        std::string line;
        std::istringstream words(part);
        std::string w;
        while (words >> w) {
            if (used >= token_budget) break;
            if (!line.empty()) line.push_back(' ');
            line += w;
            ++used;
        }
        if (line.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += line;
        if (used >= token_budget) break;
    }
    return out;
}

LlmReasoner::LlmReasoner(std::shared_ptr<const ChatClient> client, RetryPolicy transport, int max_tokens)
    : client_(std::move(client)), transport_(transport), max_tokens_(max_tokens) {}

std::string LlmReasoner::render_prompt(const ReasoningInput& input) {
    return prompts::render(prompts::eligibility_reasoning(), {{"eligibility_criteria_text", input.criteria_block},
                                                              {"patient_profile", input.patient_block}});
}

std::string LlmReasoner::reason(const ReasoningInput& input) const {
    InferenceRequest request;
    request.messages = {{"user", render_prompt(input)}};
    request.max_tokens = max_tokens_;
    request.policy = transport_;
    try {
        return client_->complete(request).text;
    } catch (const Error& e) {
        if (e.code() == Errc::BackendUnavailable || e.code() == Errc::Timeout) {
            throw Error(Errc::ReasonerUnavailable, std::string("eligibility reasoner: ") + e.what());
        }
        throw;
    }
}

double token_overlap(std::string_view a, std::string_view b) {
    const auto ta = text::lexical_tokens(a);
    const auto tb = text::lexical_tokens(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : sa) common += sb.count(t);
    return static_cast<double>(common) / static_cast<double>(std::max(sa.size(), sb.size()));
}

std::optional<ParsedResponse> parse_reasoner_response(std::string_view completion, const Trial& trial) {
    const auto object = extract_json_object(completion);
    if (object.empty()) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(object);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    constexpr const char* kInc = "Inclusion_Criteria_Evaluation";
    constexpr const char* kExc = "Exclusion_Criteria_Evaluation";
    if (!j.is_object() || !j.contains(kInc) || !j.contains(kExc) || !j[kInc].is_array() || !j[kExc].is_array()) {
        return std::nullopt;
    }

    ParsedResponse out;
    std::vector<bool> assigned(trial.criteria.size(), false);
    for (const auto& c : trial.criteria) out.verdicts.push_back({c.criterion_id, c.kind, Classification::Unclear, ""});

    auto handle = [&](const nlohmann::json& item, CriterionKind kind) {
        const std::string section = std::string(to_string(kind));
        if (!item.is_object() || !item.contains("Criterion") || !item["Criterion"].is_string() ||
            !item.contains("Classification") || !item["Classification"].is_string()) {
            out.diagnostics.push_back(section + ": item without Criterion/Classification strings dropped");
            return;
        }
        const auto text = item["Criterion"].get<std::string>();
        const auto cls = parse_classification(item["Classification"].get<std::string>(), kind);
        if (!cls) {
            out.diagnostics.push_back(section + ": invalid classification '" +
                                      item["Classification"].get<std::string>() + "' for \"" + text + "\"");
            return;
        }
        std::string justification;
        if (item.contains("Justification") && item["Justification"].is_string()) {
            justification = item["Justification"].get<std::string>();
        }

        const auto key = text::clean_text(text);
        std::optional<std::size_t> match;
        for (std::size_t i = 0; i < trial.criteria.size() && !match; ++i) {
            if (!assigned[i] && trial.criteria[i].kind == kind && trial.criteria[i].text == key) match = i;
        }
        if (!match) {
            double best = 0.0;
            for (std::size_t i = 0; i < trial.criteria.size(); ++i) {
                if (assigned[i] || trial.criteria[i].kind != kind) continue;
                const double o = token_overlap(key, trial.criteria[i].text);
                if (o >= kCriterionMatchThreshold && o > best) {
                    best = o;
                    match = i;
                }
            }
        }
        if (!match) {
            out.diagnostics.push_back(section + ": unmatched criterion dropped: \"" + text + "\"");
            return;
        }
        assigned[*match] = true;
        auto& v = out.verdicts[*match];
        v.classification = *cls;
        v.justification = std::string(text::trim(justification));
        if (decisive(v.classification) && v.justification.empty()) {
            out.diagnostics.push_back(v.criterion_id + ": decisive classification without justification set to UNCLEAR");
            v.classification = Classification::Unclear;
        }
    };
    for (const auto& item : j[kInc]) handle(item, CriterionKind::Inclusion);
    for (const auto& item : j[kExc]) handle(item, CriterionKind::Exclusion);

    if (j.contains("Recap") && j["Recap"].is_string()) out.recap = j["Recap"].get<std::string>();
    if (j.contains("Final Decision") && j["Final Decision"].is_string()) {
        out.final_decision = parse_final_decision(j["Final Decision"].get<std::string>());
        if (!out.final_decision) out.diagnostics.push_back("unrecognized Final Decision");
    }
    return out;
}

EligibilityAssessment assess_eligibility(const PatientProfile& profile, const QueryBundle& bundle,
                                         const Trial& trial, const Reasoner& reasoner,
                                         std::span<const std::string> context_statements,
                                         const AssessConfig& config) {
    EligibilityAssessment a;
    a.trial_id = trial.nct_id;
    a.patient_id = profile.patient_id;
    if (trial.criteria.empty()) {
        a.diagnostics.push_back("trial has no criteria; nothing to assess");
        return a;
    }

    const ReasoningInput input{profile, trial, render_criteria_block(trial),
                               render_patient_block(profile, bundle, context_statements, config.context_token_budget)};
    const int attempts = std::max(config.retries, 0) + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (auto parsed = parse_reasoner_response(reasoner.reason(input), trial)) {
            a.verdicts = std::move(parsed->verdicts);
            a.recap = std::move(parsed->recap);
            a.final_decision = parsed->final_decision;
            a.diagnostics = std::move(parsed->diagnostics);
            a.scores = compute_composite(a.verdicts);
            return a;
        }
    }
    a.degraded = true;
    a.diagnostics.push_back("malformed reasoner output after " + std::to_string(attempts) + " attempts");
    for (const auto& c : trial.criteria) a.verdicts.push_back({c.criterion_id, c.kind, Classification::Unclear, ""});
    a.scores = compute_composite(a.verdicts);
    return a;
}

std::vector<RankedTrial> final_rank(std::vector<RankedTrial> trials) {
    auto split = std::stable_partition(trials.begin(), trials.end(), [](const RankedTrial& t) { return t.assessed; });
    std::sort(trials.begin(), split, [](const RankedTrial& a, const RankedTrial& b) {
        if (a.s_composite != b.s_composite) return a.s_composite > b.s_composite;
        if (a.rerank_score != b.rerank_score) return a.rerank_score > b.rerank_score;
        return a.trial_id < b.trial_id;
    });
    return trials;
}

nlohmann::ordered_json to_json(const CriterionVerdict& v) {
    nlohmann::ordered_json j;
    j["criterion_id"] = v.criterion_id;
    j["kind"] = to_string(v.kind);
    j["classification"] = to_string(v.classification);
    j["justification"] = v.justification;
    return j;
}

nlohmann::ordered_json to_json(const EligibilityAssessment& a) {
    nlohmann::ordered_json j;
    j["trial_id"] = a.trial_id;
    j["patient_id"] = a.patient_id;
    nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
    for (const auto& v : a.verdicts) verdicts.push_back(to_json(v));
    j["verdicts"] = verdicts;
    j["recap"] = a.recap;
    j["final_decision"] = a.final_decision ? nlohmann::ordered_json(to_string(*a.final_decision)) : nlohmann::ordered_json();
    j["s_inc"] = a.scores.s_inc;
    j["s_exc"] = a.scores.s_exc;
    j["s_composite"] = a.scores.s;
    j["degraded"] = a.degraded;
    j["diagnostics"] = a.diagnostics;
    return j;
}

}  // namespace trialmatch
