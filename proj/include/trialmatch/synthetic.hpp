#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "trialmatch/mock_backends.hpp"

namespace trialmatch::synthetic {

/// Deterministic test corpus: every patient fully satisfies one designated
/// trial and violates at least one annotated criterion of every other.
struct Corpus {
    std::string dictionary_ndjson;
    std::vector<std::pair<std::string, std::string>> trial_xml;  // (nct_id, document)
    std::vector<std::pair<std::string, std::string>> patients;   // (patient_id, phenopacket)
    std::vector<std::string> designated;                         // per patient, parallel to `patients`
    std::string qrels;  // designated = 2, other trials of the same disease = 1
    MockRuleSet rules;
};

inline constexpr std::size_t kTrialCount = 200;
inline constexpr std::size_t kPatientCount = 20;

Corpus make_corpus();

/// Trial index for patient i.
std::size_t designated_trial(std::size_t patient);
std::string nct_id(std::size_t trial);

/// The cancer-patient phenopacket used as patient 0.
std::string_view example_phenopacket();

/// xml/<nct>.xml, dictionary.jsonl, patients/<id>.json, qrels.txt,
/// designated.tsv, mock_rules.json.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace trialmatch::synthetic
