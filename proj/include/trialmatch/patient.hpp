#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialmatch/corpus.hpp"
#include "trialmatch/embed.hpp"
#include "trialmatch/entity.hpp"
#include "trialmatch/inference.hpp"
#include "trialmatch/normalize.hpp"

namespace trialmatch {

enum class Sex { Male, Female, Unknown };

std::string_view to_string(Sex sex);

struct OntologyTerm {
    std::string id;
    std::string label;
    std::string section;  // top-level packet field it came from
    friend bool operator==(const OntologyTerm&, const OntologyTerm&) = default;
};

struct PatientProfile {
    std::string patient_id;  // subject.id
    std::string packet_id;
    std::optional<double> age_years;
    Sex sex = Sex::Unknown;
    std::string narrative;
    std::vector<OntologyTerm> structured_terms;
    std::vector<EntityMention> entities;
    std::vector<std::string> synonyms;
    std::optional<Location> location;

    friend bool operator==(const PatientProfile&, const PatientProfile&) = default;
};

struct PhenopacketOptions {
    /// Enables the date-of-birth age fallback.
    std::optional<std::chrono::year_month_day> reference_date;
};

/// Phenopackets v2 subset. Narrative = every "label" and "description"
/// string in document order (metaData skipped), one per line, exact repeats
/// dropped. Throws MalformedJson, MissingSubjectId.
PatientProfile parse_phenopacket(std::string_view json_document, const PhenopacketOptions& options = {});

/// "P55Y" -> 55, "P55Y6M" -> 55.5; weeks /52, days /365.25. Time parts ignored.
std::optional<double> parse_iso8601_age(std::string_view duration);

/// Tags and normalizes the narrative, then adds synonyms of linked concepts.
void annotate_profile(PatientProfile& profile, const ConceptDictionary& dictionary,
                      std::vector<NormalizationDiagnostic>* diagnostics = nullptr);

/// Linked entity concepts plus structured term ids known to the dictionary.
std::set<std::string> profile_concepts(const PatientProfile& profile, const ConceptDictionary* dictionary);

void to_json(nlohmann::json& j, const PatientProfile& p);
void from_json(const nlohmann::json& j, PatientProfile& p);

struct AugmenterOutput {
    std::vector<std::string> main_conditions;
    std::vector<std::string> other_conditions;
    std::vector<std::string> expanded_sentences;
};

class Augmenter {
public:
    virtual ~Augmenter() = default;
    virtual AugmenterOutput augment(const PatientProfile& profile) const = 0;
};

/// Deterministic stand-in: main = normalized disease concepts, other = the
/// remaining entity labels, sentences = the narrative split into sentences.
class MockAugmenter final : public Augmenter {
public:
    AugmenterOutput augment(const PatientProfile& profile) const override;
};

/// Sends the query-expansion prompt and parses its JSON object. Malformed
/// output is retried `parse_retries` times.
class LlmAugmenter final : public Augmenter {
public:
    LlmAugmenter(std::shared_ptr<const ChatClient> client, int parse_retries = 2, RetryPolicy transport = {});
    AugmenterOutput augment(const PatientProfile& profile) const override;

private:
    std::shared_ptr<const ChatClient> client_;
    int parse_retries_;
    RetryPolicy transport_;
};

/// Parses a query-expansion completion; nullopt when a required list is
/// missing or not an array of strings.
std::optional<AugmenterOutput> parse_augmenter_completion(std::string_view completion);

inline constexpr std::size_t kMaxSynonymsPerCondition = 10;
inline constexpr std::size_t kMaxOtherConditions = 50;

struct QueryBundle {
    std::string patient_id;
    std::vector<std::string> main_conditions;
    std::vector<std::string> other_conditions;
    std::vector<std::string> expanded_sentences;
    std::vector<std::string> entity_terms;  // synonyms of linked concepts
    std::vector<Vector> query_vectors;      // one per sentence, then the narrative

    /// Union of the lexical tokens of every string list, first-seen order.
    std::vector<std::string> lexical_terms() const;
    bool empty() const;

    friend bool operator==(const QueryBundle&, const QueryBundle&) = default;
};

void to_json(nlohmann::json& j, const QueryBundle& b);
void from_json(const nlohmann::json& j, QueryBundle& b);

/// Empty narrative -> empty bundle, no augmenter call, no vectors.
QueryBundle expand_query(const PatientProfile& profile, const Augmenter& augmenter, const Embedder& embedder);

}  // namespace trialmatch
