#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialmatch/config.hpp"
#include "trialmatch/corpus.hpp"
#include "trialmatch/embed.hpp"
#include "trialmatch/index_store.hpp"
#include "trialmatch/mock_backends.hpp"
#include "trialmatch/normalize.hpp"
#include "trialmatch/patient.hpp"
#include "trialmatch/rank.hpp"

namespace trialmatch {

// ---- ingest ----------------------------------------------------------------

/// Segments the eligibility text, tags and normalizes the criteria and the
/// trial-level text, and adds concept synonyms.
void annotate_trial(Trial& trial, const ConceptDictionary* dictionary,
                    std::vector<NormalizationDiagnostic>* diagnostics = nullptr);

struct IngestResult {
    std::vector<Trial> trials;  // sorted by nct_id
    std::vector<NormalizationDiagnostic> normalization;
    std::vector<nlohmann::ordered_json> file_errors;  // {file, error, message}
};

/// Every *.xml under `dir` (sorted by path). Unparseable files are reported
/// and skipped; a duplicate nct_id throws DuplicateDocId.
IngestResult ingest_directory(const std::filesystem::path& dir, const ConceptDictionary* dictionary);

std::string diagnostics_jsonl(const IngestResult& result);

// ---- index -----------------------------------------------------------------

std::vector<LexicalDocument> trial_documents(const std::vector<Trial>& trials);
std::vector<LexicalDocument> criterion_documents(const std::vector<Trial>& trials);

IndexSet build_indices(const std::vector<Trial>& trials, const Embedder& embedder, const HnswParams& params);

// ---- match -----------------------------------------------------------------

struct Backends {
    std::shared_ptr<const Embedder> embedder;
    std::shared_ptr<const Augmenter> augmenter;
    std::shared_ptr<const RelevanceJudge> judge;
    std::shared_ptr<const Reasoner> reasoner;
};

std::shared_ptr<const Embedder> make_embedder(const EngineConfig& config);

/// Mocks when toggled, HTTP clients otherwise. Throws InvalidArgument when a
/// real backend is requested without a URL.
Backends make_backends(const EngineConfig& config, const ConceptDictionary* dictionary, MockRuleSet rules);

/// Trials plus the lookups the match stage needs.
class TrialCatalog {
public:
    explicit TrialCatalog(std::vector<Trial> trials);

    const std::vector<Trial>& trials() const { return trials_; }
    const Trial* find(const std::string& nct_id) const;
    const std::unordered_map<std::string, const Criterion*>& criteria() const { return criteria_; }

private:
    std::vector<Trial> trials_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, const Criterion*> criteria_;
};

struct MatchedTrial {
    RankedTrial ranked;
    double fused_score = 0.0;
    double aggregate = 0.0;
    std::optional<EligibilityAssessment> assessment;
};

struct MatchReport {
    std::string patient_id;
    QueryBundle bundle;
    std::size_t prefilter_survivors = 0;
    std::vector<RetrievalHit> candidates;
    std::vector<MatchedTrial> ranking;

    nlohmann::ordered_json to_json() const;
    std::string run_lines(std::string_view tag) const;  // six-column TREC
};

/// parse (already done) -> annotate -> expand -> prefilter -> hybrid search
/// -> rerank -> assess top R -> final rank.
MatchReport match_patient(PatientProfile profile, const TrialCatalog& catalog, const IndexSet& indices,
                          const Backends& backends, const EngineConfig& config,
                          const ConceptDictionary* dictionary);

}  // namespace trialmatch
