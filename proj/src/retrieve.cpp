#include "trialmatch/retrieve.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

std::string_view to_string(FusionMode mode) { return mode == FusionMode::MinMax ? "minmax" : "rrf"; }

FusionMode parse_fusion_mode(std::string_view name) {
    const auto lower = text::to_lower_ascii(name);
    if (lower == "minmax") return FusionMode::MinMax;
    if (lower == "rrf") return FusionMode::ReciprocalRank;
    throw Error(Errc::InvalidArgument, "unknown fusion mode: " + std::string(name));
}

void RetrievalConfig::validate() const {
    if (k_candidates == 0 || k_arm == 0) throw Error(Errc::InvalidArgument, "k_candidates and k_arm must be >= 1");
    if (k_candidates > k_arm) throw Error(Errc::InvalidArgument, "k_candidates must not exceed k_arm");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in [0, 1]");
    if (!lexical_arm && !semantic_arm) throw Error(Errc::InvalidArgument, "both retrieval arms disabled");
}

bool passes_prefilter(const Trial& trial, const PatientProfile& profile, const RetrievalConfig& config) {
    if (config.filter_age && profile.age_years) {
        const double age = *profile.age_years;
        if (trial.min_age_years && age < *trial.min_age_years) return false;
        if (trial.max_age_years && age > *trial.max_age_years) return false;
    }
    if (config.filter_sex && profile.sex != Sex::Unknown && trial.sex_eligibility != SexEligibility::All) {
        const bool female = profile.sex == Sex::Female;
        if (female != (trial.sex_eligibility == SexEligibility::Female)) return false;
    }
    if (config.filter_status && trial.overall_status.kind != TrialStatus::Kind::Recruiting) return false;
    if (config.filter_location && profile.location && !profile.location->country.empty()) {
        const auto want = text::to_lower_ascii(text::trim(profile.location->country));
        const bool any = std::any_of(trial.locations.begin(), trial.locations.end(), [&](const Location& l) {
            return text::to_lower_ascii(text::trim(l.country)) == want;
        });
        if (!any) return false;
    }
    return true;
}

IdFilter prefilter(std::span<const Trial> trials, const PatientProfile& profile, const RetrievalConfig& config) {
    IdFilter allowed;
    for (const auto& t : trials) {
        if (passes_prefilter(t, profile, config)) allowed.insert(t.nct_id);
    }
    return allowed;
}

namespace {

std::unordered_map<std::string, double> min_max(const std::vector<ScoredDoc>& list) {
    std::unordered_map<std::string, double> out;
    if (list.empty()) return out;
    double lo = list.front().score;
    double hi = lo;
    for (const auto& d : list) {
        lo = std::min(lo, d.score);
        hi = std::max(hi, d.score);
    }
    for (const auto& d : list) out[d.id] = hi > lo ? (d.score - lo) / (hi - lo) : 1.0;
    return out;
}

}  // namespace

std::vector<RetrievalHit> fuse_arms(const std::vector<ScoredDoc>& lexical, const std::vector<ScoredDoc>& semantic,
                                    double alpha, FusionMode mode) {
    std::map<std::string, RetrievalHit> merged;
    for (const auto& d : lexical) {
        auto& h = merged[d.id];
        h.trial_id = d.id;
        h.lexical_score = d.score;
        h.from_lexical = true;
    }
    for (const auto& d : semantic) {
        auto& h = merged[d.id];
        h.trial_id = d.id;
        h.semantic_score = d.score;
        h.from_semantic = true;
    }

    if (mode == FusionMode::MinMax) {
        const auto lex = min_max(lexical);
        const auto sem = min_max(semantic);
        for (auto& [id, h] : merged) {
            const double l = h.from_lexical ? lex.at(id) : 0.0;
            const double s = h.from_semantic ? sem.at(id) : 0.0;
            h.fused_score = alpha * l + (1.0 - alpha) * s;
        }
    } else {
        constexpr double k = 60.0;
        auto ranks = [](const std::vector<ScoredDoc>& list) {
            std::unordered_map<std::string, double> r;
            for (std::size_t i = 0; i < list.size(); ++i) r[list[i].id] = static_cast<double>(i + 1);
            return r;
        };
        const auto lr = ranks(lexical);
        const auto sr = ranks(semantic);
        for (auto& [id, h] : merged) {
            double v = 0.0;
            if (h.from_lexical) v += 1.0 / (k + lr.at(id));
            if (h.from_semantic) v += 1.0 / (k + sr.at(id));
            h.fused_score = v / (2.0 / (k + 1.0));
        }
    }

    std::vector<RetrievalHit> hits;
    hits.reserve(merged.size());
    for (auto& [id, h] : merged) hits.push_back(std::move(h));
    std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
        return a.trial_id < b.trial_id;
    });
    return hits;
}

std::vector<ScoredDoc> semantic_arm(std::span<const Vector> query_vectors, const HnswIndex& index, std::size_t k,
                                    const IdFilter* allowed) {
    std::unordered_map<std::string, double> best;
    for (const auto& q : query_vectors) {
        for (auto& n : index.search(q, k, allowed, std::max(index.params().ef_search, k))) {
            auto [it, inserted] = best.emplace(n.id, n.similarity);
            if (!inserted) it->second = std::max(it->second, n.similarity);
        }
    }
    std::vector<ScoredDoc> out;
    out.reserve(best.size());
    for (auto& [id, s] : best) out.push_back({id, s});
    std::sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return out;
}

std::vector<RetrievalHit> hybrid_search(const QueryBundle& bundle, const LexicalIndex& lexical,
                                        const HnswIndex& vectors, const IdFilter* allowed,
                                        const RetrievalConfig& config) {
    config.validate();
    const auto terms = bundle.lexical_terms();
    if (terms.empty() && bundle.query_vectors.empty()) {
        throw Error(Errc::EmptyBundle, "query bundle for " + bundle.patient_id + " has no terms and no vectors");
    }
    if (allowed && allowed->empty()) return {};

    auto lex_future = std::async(std::launch::async, [&]() -> std::vector<ScoredDoc> {
        if (!config.lexical_arm || terms.empty()) return {};
        return lexical.topk(terms, config.k_arm, allowed);
    });
    std::vector<ScoredDoc> sem;
    if (config.semantic_arm && !bundle.query_vectors.empty()) {
        sem = semantic_arm(bundle.query_vectors, vectors, config.k_arm, allowed);
    }
    const auto lex = lex_future.get();

    auto hits = fuse_arms(lex, sem, config.alpha, config.fusion);
    if (hits.size() > config.k_candidates) hits.resize(config.k_candidates);
    return hits;
}

std::string candidates_jsonl(const std::string& patient_id, const std::vector<RetrievalHit>& hits) {
    std::string out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        nlohmann::ordered_json j;
        j["patient_id"] = patient_id;
        j["trial_id"] = hits[i].trial_id;
        j["lexical_score"] = hits[i].lexical_score;
        j["semantic_score"] = hits[i].semantic_score;
        j["fused_score"] = hits[i].fused_score;
        j["rank"] = i + 1;
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace trialmatch
