#include "trialmatch/normalize.hpp"

#include <algorithm>
#include <cctype>

#include "trialmatch/error.hpp"

namespace trialmatch {

namespace {

const std::set<std::string> kEmpty;

const std::set<std::string>& lookup(const std::unordered_map<std::string, std::set<std::string>>& index,
                                    const std::string& key) {
    auto it = index.find(key);
    return it == index.end() ? kEmpty : it->second;
}

std::size_t word_count(const std::string& key) {
    return key.empty() ? 0 : static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
}

// Words inside one phrase may be separated by whitespace, hyphens, slashes or
// apostrophes, but not by clause punctuation.
bool joinable_gap(std::string_view gap) {
    if (gap.size() > 3) return false;
    return gap.find_first_of(",;:.()[]{}") == std::string_view::npos;
}

}  // namespace

ConceptDictionary::ConceptDictionary(std::vector<Concept> concepts) {
    for (auto& c : concepts) {
        if (c.id.empty()) throw Error(Errc::InvalidArgument, "concept with empty id");
        std::vector<std::string> synonyms;
        for (const auto& s : c.synonyms) {
            auto cleaned = text::clean_text(s);
            if (!cleaned.empty() && std::find(synonyms.begin(), synonyms.end(), cleaned) == synonyms.end()) {
                synonyms.push_back(std::move(cleaned));
            }
        }
        c.synonyms = std::move(synonyms);

        const auto label_key = text::surface_key(c.label);
        if (!label_key.empty()) {
            by_label_[label_key].insert(c.id);
            by_surface_[label_key].insert(c.id);
            max_phrase_words_ = std::max(max_phrase_words_, word_count(label_key));
        }
        for (const auto& s : c.synonyms) {
            const auto key = text::surface_key(s);
            if (key.empty()) continue;
            by_synonym_[key].insert(c.id);
            by_surface_[key].insert(c.id);
            max_phrase_words_ = std::max(max_phrase_words_, word_count(key));
        }
        auto id = c.id;
        if (!entries_.emplace(id, std::move(c)).second) {
            throw Error(Errc::InvalidArgument, "duplicate concept id " + id);
        }
    }
}

ConceptDictionary ConceptDictionary::from_ndjson(std::string_view content) {
    std::vector<Concept> concepts;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= content.size()) {
        auto nl = content.find('\n', start);
        if (nl == std::string_view::npos) nl = content.size();
        const auto line = text::trim(content.substr(start, nl - start));
        start = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Concept c;
            c.id = j.at("id").get<std::string>();
            c.label = j.at("label").get<std::string>();
            c.entity_class = EntityClass::parse(j.value("class", "other"));
            c.synonyms = j.value("synonyms", std::vector<std::string>{});
            concepts.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::MalformedJson, "dictionary line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ConceptDictionary(std::move(concepts));
}

const Concept* ConceptDictionary::find(std::string_view concept_id) const {
    auto it = entries_.find(std::string(concept_id));
    return it == entries_.end() ? nullptr : &it->second;
}

const std::set<std::string>& ConceptDictionary::label_matches(const std::string& key) const {
    return lookup(by_label_, key);
}

const std::set<std::string>& ConceptDictionary::synonym_matches(const std::string& key) const {
    return lookup(by_synonym_, key);
}

const std::set<std::string>& ConceptDictionary::surface_matches(const std::string& key) const {
    return lookup(by_surface_, key);
}

nlohmann::json to_json(const NormalizationDiagnostic& d) {
    return {{"source", d.source},
            {"surface", d.surface},
            {"span", {d.begin, d.end}},
            {"reason", d.reason == NormalizationDiagnostic::Reason::Ambiguous ? "ambiguous" : "unresolved"},
            {"sieve", d.sieve ? nlohmann::json(to_string(*d.sieve)) : nlohmann::json()},
            {"candidates", d.candidates}};
}

std::vector<EntityMention> tag_entities(std::string_view text, const ConceptDictionary& dictionary) {
    std::vector<EntityMention> mentions;
    const auto words = text::word_spans(text);
    const auto max_words = dictionary.max_phrase_words();
    std::size_t i = 0;
    while (i < words.size()) {
        bool matched = false;
        // Longest phrase that stays within one clause.
        std::size_t reach = 1;
        while (reach < max_words && i + reach < words.size() &&
               joinable_gap(text.substr(words[i + reach - 1].end, words[i + reach].begin - words[i + reach - 1].end))) {
            ++reach;
        }
        for (std::size_t len = std::min(reach, words.size() - i); len >= 1; --len) {
            std::string key = words[i].norm;
            for (std::size_t k = 1; k < len; ++k) {
                key.push_back(' ');
                key += words[i + k].norm;
            }
            const auto& ids = dictionary.surface_matches(key);
            if (ids.empty()) continue;
            EntityMention m;
            m.begin = words[i].begin;
            m.end = words[i + len - 1].end;
            m.surface = std::string(text.substr(m.begin, m.end - m.begin));
            m.entity_class = dictionary.find(*ids.begin())->entity_class;
            mentions.push_back(std::move(m));
            i += len;
            matched = true;
            break;
        }
        if (!matched) ++i;
    }
    return mentions;
}

std::string find_local_definition(std::string_view text, std::string_view abbreviation) {
    if (abbreviation.empty()) return {};
    const std::string needle = "(" + std::string(abbreviation) + ")";
    std::size_t pos = text.find(needle);
    while (pos != std::string_view::npos) {
        // Candidate long form: at most min(|A| + 5, 2|A|) words before '('.
        const std::size_t max_words = std::min(abbreviation.size() + 5, abbreviation.size() * 2);
        std::vector<std::string_view> words;
        std::size_t end = pos;
        while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
        std::size_t cursor = end;
        while (cursor > 0 && words.size() < max_words) {
            std::size_t word_end = cursor;
            while (word_end > 0 && std::isspace(static_cast<unsigned char>(text[word_end - 1]))) --word_end;
            if (word_end == 0) break;
            std::size_t word_begin = word_end;
            while (word_begin > 0 && !std::isspace(static_cast<unsigned char>(text[word_begin - 1]))) --word_begin;
            words.push_back(text.substr(word_begin, word_end - word_begin));
            cursor = word_begin;
        }
        const std::string candidate(text.substr(cursor, end - cursor));

        // Right-to-left character alignment; the first abbreviation character
        // must start a word.
        auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
        auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
        long s_index = static_cast<long>(abbreviation.size()) - 1;
        long l_index = static_cast<long>(candidate.size()) - 1;
        bool ok = true;
        while (s_index >= 0) {
            const char current = lower(abbreviation[static_cast<std::size_t>(s_index)]);
            if (!alnum(current)) {
                --s_index;
                continue;
            }
            while ((l_index >= 0 && lower(candidate[static_cast<std::size_t>(l_index)]) != current) ||
                   (s_index == 0 && l_index > 0 && alnum(candidate[static_cast<std::size_t>(l_index - 1)]))) {
                --l_index;
            }
            if (l_index < 0) {
                ok = false;
                break;
            }
            --l_index;
            --s_index;
        }
        if (ok) {
            const auto space = candidate.rfind(' ', static_cast<std::size_t>(l_index + 1));
            const auto start = space == std::string::npos ? 0 : space + 1;
            auto long_form = std::string(text::trim(std::string_view(candidate).substr(start)));
            if (!long_form.empty() && text::surface_key(long_form) != text::surface_key(abbreviation)) {
                return long_form;
            }
        }
        pos = text.find(needle, pos + 1);
    }
    return {};
}

namespace {

bool looks_like_abbreviation(std::string_view surface) {
    std::size_t upper = 0;
    if (surface.size() < 2 || surface.size() > 10) return false;
    for (char c : surface) {
        const auto u = static_cast<unsigned char>(c);
        if (u >= 'A' && u <= 'Z') {
            ++upper;
        } else if (!(u >= '0' && u <= '9') && u != '-') {
            return false;
        }
    }
    return upper >= 2;
}

std::string initials(const std::string& key) {
    std::string out;
    bool at_start = true;
    for (char c : key) {
        if (c == ' ') {
            at_start = true;
        } else if (at_start) {
            out.push_back(c);
            at_start = false;
        }
    }
    return out;
}

void link(EntityMention& m, const Concept& c, Sieve sieve) {
    m.concept_id = c.id;
    m.concept_label = c.label;
    m.sieve_used = sieve;
    m.entity_class = c.entity_class;
}

}  // namespace

EntityMention sieve_normalize(const EntityMention& mention, std::string_view context_text,
                              const ConceptDictionary& dictionary,
                              std::vector<NormalizationDiagnostic>* diagnostics) {
    EntityMention out = mention;
    out.concept_id.reset();
    out.concept_label.reset();
    out.sieve_used.reset();

    auto report = [&](NormalizationDiagnostic::Reason reason, std::optional<Sieve> sieve,
                      const std::set<std::string>& candidates) {
        if (!diagnostics) return;
        diagnostics->push_back({mention.surface, mention.begin, mention.end, reason, sieve,
                                std::vector<std::string>(candidates.begin(), candidates.end()), {}});
    };
    // Returns true when the sieve decided the outcome (linked or tied).
    auto apply = [&](const std::set<std::string>& ids, Sieve sieve) {
        if (ids.empty()) return false;
        if (ids.size() == 1) {
            link(out, *dictionary.find(*ids.begin()), sieve);
        } else {
            report(NormalizationDiagnostic::Reason::Ambiguous, sieve, ids);
        }
        return true;
    };

    const auto key = text::surface_key(mention.surface);
    if (apply(dictionary.label_matches(key), Sieve::Exact)) return out;
    if (apply(dictionary.synonym_matches(key), Sieve::Synonym)) return out;

    if (looks_like_abbreviation(mention.surface)) {
        const auto long_form = find_local_definition(context_text, mention.surface);
        if (!long_form.empty() && apply(dictionary.surface_matches(text::surface_key(long_form)), Sieve::Abbreviation)) {
            return out;
        }
        std::string letters;
        for (char c : mention.surface) {
            if (std::isalpha(static_cast<unsigned char>(c))) letters.push_back(static_cast<char>(std::tolower(c)));
        }
        const auto context_key = " " + text::surface_key(context_text) + " ";
        auto in_context = [&](const std::string& k) {
            return !k.empty() && context_key.find(" " + k + " ") != std::string::npos;
        };
        std::set<std::string> candidates;
        for (const auto& [id, c] : dictionary.entries()) {
            const auto label_key = text::surface_key(c.label);
            if (initials(label_key) != letters) continue;
            bool present = in_context(label_key);
            for (const auto& s : c.synonyms) present = present || in_context(text::surface_key(s));
            if (present) candidates.insert(id);
        }
        if (apply(candidates, Sieve::Abbreviation)) return out;
    }
    report(NormalizationDiagnostic::Reason::Unresolved, std::nullopt, {});
    return out;
}

std::vector<EntityMention> annotate(std::string_view text, const ConceptDictionary& dictionary,
                                    std::vector<NormalizationDiagnostic>* diagnostics) {
    auto mentions = tag_entities(text, dictionary);
    for (auto& m : mentions) m = sieve_normalize(m, text, dictionary, diagnostics);

    // Uppercase tokens the dictionary scan missed get a chance at the
    // abbreviation sieve; they are kept only when it links them.
    std::vector<EntityMention> abbreviations;
    for (const auto& w : text::word_spans(text)) {
        const auto surface = text.substr(w.begin, w.end - w.begin);
        if (!looks_like_abbreviation(surface)) continue;
        const bool covered = std::any_of(mentions.begin(), mentions.end(), [&](const EntityMention& m) {
            return w.begin < m.end && m.begin < w.end;
        });
        if (covered) continue;
        EntityMention candidate;
        candidate.surface = std::string(surface);
        candidate.begin = w.begin;
        candidate.end = w.end;
        candidate = sieve_normalize(candidate, text, dictionary, nullptr);
        if (candidate.normalized()) abbreviations.push_back(std::move(candidate));
    }
    if (!abbreviations.empty()) {
        mentions.insert(mentions.end(), abbreviations.begin(), abbreviations.end());
        std::sort(mentions.begin(), mentions.end(),
                  [](const EntityMention& a, const EntityMention& b) { return a.begin < b.begin; });
    }
    return mentions;
}

void enrich_synonyms(const std::vector<EntityMention>& entities, std::vector<std::string>& synonyms,
                     const ConceptDictionary& dictionary) {
    for (const auto& m : entities) {
        if (!m.concept_id) continue;
        const auto* c = dictionary.find(*m.concept_id);
        if (!c) continue;
        for (const auto& s : c->synonyms) {
            if (std::find(synonyms.begin(), synonyms.end(), s) == synonyms.end()) synonyms.push_back(s);
        }
    }
}

}  // namespace trialmatch
