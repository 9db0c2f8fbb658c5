#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialmatch/entity.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

struct Concept {
    std::string id;
    std::string label;
    EntityClass entity_class;
    std::vector<std::string> synonyms;  // lowercased, deduplicated, source order
};

/// Immutable after construction. Lookups go through text::surface_key, so
/// they are case-insensitive and whitespace/punctuation-normalized.
class ConceptDictionary {
public:
    ConceptDictionary() = default;
    explicit ConceptDictionary(std::vector<Concept> concepts);

    /// One JSON object per line: {"id", "label", "class", "synonyms": [...]}.
    static ConceptDictionary from_ndjson(std::string_view content);

    const Concept* find(std::string_view concept_id) const;
    const std::map<std::string, Concept>& entries() const { return entries_; }

    /// Concept ids whose preferred label has this key.
    const std::set<std::string>& label_matches(const std::string& key) const;
    /// Concept ids listing this key as a synonym.
    const std::set<std::string>& synonym_matches(const std::string& key) const;
    /// Union of the two; the reverse index used by the tagger.
    const std::set<std::string>& surface_matches(const std::string& key) const;

    std::size_t max_phrase_words() const { return max_phrase_words_; }
    bool empty() const { return entries_.empty(); }

private:
    std::map<std::string, Concept> entries_;
    std::unordered_map<std::string, std::set<std::string>> by_label_;
    std::unordered_map<std::string, std::set<std::string>> by_synonym_;
    std::unordered_map<std::string, std::set<std::string>> by_surface_;
    std::size_t max_phrase_words_ = 0;
};

/// Reported when a mention cannot be linked to exactly one concept.
struct NormalizationDiagnostic {
    enum class Reason { Unresolved, Ambiguous };
    std::string surface;
    std::size_t begin = 0;
    std::size_t end = 0;
    Reason reason = Reason::Unresolved;
    std::optional<Sieve> sieve;  // sieve at which the tie happened
    std::vector<std::string> candidates;
    std::string source;  // document id, filled by callers that know it
};

nlohmann::json to_json(const NormalizationDiagnostic& d);

/// Longest-match, non-overlapping, left-to-right dictionary scan over word
/// boundaries. Concept fields are left unset.
std::vector<EntityMention> tag_entities(std::string_view text, const ConceptDictionary& dictionary);

/// Exact -> synonym -> abbreviation, first success wins. A tie at any sieve
/// leaves the mention unlinked and reports it.
EntityMention sieve_normalize(const EntityMention& mention, std::string_view context_text,
                              const ConceptDictionary& dictionary,
                              std::vector<NormalizationDiagnostic>* diagnostics = nullptr);

/// tag_entities followed by sieve_normalize on every mention.
std::vector<EntityMention> annotate(std::string_view text, const ConceptDictionary& dictionary,
                                    std::vector<NormalizationDiagnostic>* diagnostics = nullptr);

/// Schwartz-Hearst style search for "long form (ABBR)" in text. Returns the
/// long form, or an empty string.
std::string find_local_definition(std::string_view text, std::string_view abbreviation);

/// Appends the synonym sets of every linked concept to `synonyms`, skipping
/// ones already present. Idempotent.
void enrich_synonyms(const std::vector<EntityMention>& entities, std::vector<std::string>& synonyms,
                     const ConceptDictionary& dictionary);

template <typename Unit>
    requires requires(Unit u) {
        u.entities;
        u.synonyms;
    }
void enrich_with_synonyms(Unit& unit, const ConceptDictionary& dictionary) {
    enrich_synonyms(unit.entities, unit.synonyms, dictionary);
}

}  // namespace trialmatch
