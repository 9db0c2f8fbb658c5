#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trialmatch/corpus.hpp"
#include "trialmatch/hnsw.hpp"
#include "trialmatch/lexical_index.hpp"
#include "trialmatch/patient.hpp"

namespace trialmatch {

enum class FusionMode { MinMax, ReciprocalRank };

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);

struct RetrievalConfig {
    std::size_t k_candidates = 500;
    double alpha = 0.5;  // lexical weight
    std::size_t k_arm = 1000;
    bool filter_age = true;
    bool filter_sex = true;
    bool filter_status = true;
    bool filter_location = false;
    FusionMode fusion = FusionMode::MinMax;
    bool lexical_arm = true;
    bool semantic_arm = true;

    /// Throws InvalidArgument (k_candidates > k_arm, alpha outside [0,1], ...).
    void validate() const;

    friend bool operator==(const RetrievalConfig&, const RetrievalConfig&) = default;
};

struct RetrievalHit {
    std::string trial_id;
    double lexical_score = 0.0;   // raw BM25 (0 when the lexical arm missed it)
    double semantic_score = 0.0;  // max cosine over query vectors
    double fused_score = 0.0;
    bool from_lexical = false;
    bool from_semantic = false;

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Unknown patient age, unknown sex and absent patient location never exclude.
bool passes_prefilter(const Trial& trial, const PatientProfile& profile, const RetrievalConfig& config);

IdFilter prefilter(std::span<const Trial> trials, const PatientProfile& profile, const RetrievalConfig& config);

/// Per-arm min-max normalization (constant or single-item lists map to 1),
/// convex blend, missing arm = 0. RRF mode instead scores
/// (1/(60+r_lex) + 1/(60+r_sem)) / (2/61). Sorted by fused desc, id asc.
std::vector<RetrievalHit> fuse_arms(const std::vector<ScoredDoc>& lexical, const std::vector<ScoredDoc>& semantic,
                                    double alpha, FusionMode mode);

/// Semantic arm: each query vector searched within `allowed`, keeping every
/// document's best similarity. Sorted by similarity desc, id asc.
std::vector<ScoredDoc> semantic_arm(std::span<const Vector> query_vectors, const HnswIndex& index, std::size_t k,
                                    const IdFilter* allowed);

/// Throws EmptyBundle when the bundle has neither terms nor vectors.
std::vector<RetrievalHit> hybrid_search(const QueryBundle& bundle, const LexicalIndex& lexical,
                                        const HnswIndex& vectors, const IdFilter* allowed,
                                        const RetrievalConfig& config);

/// One JSON object per line: patient_id, trial_id, lexical_score,
/// semantic_score, fused_score, rank (1-based).
std::string candidates_jsonl(const std::string& patient_id, const std::vector<RetrievalHit>& hits);

}  // namespace trialmatch
