#include "trialmatch/patient.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_set>

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Sex sex) {
    switch (sex) {
        case Sex::Male: return "MALE";
        case Sex::Female: return "FEMALE";
        case Sex::Unknown: break;
    }
    return "UNKNOWN";
}

namespace {

Sex parse_sex(std::string_view s) {
    const auto lower = text::to_lower_ascii(text::trim(s));
    if (lower == "female") return Sex::Female;
    if (lower == "male") return Sex::Male;
    return Sex::Unknown;
}

const std::vector<std::string_view> kTermSections = {"phenotypicFeatures", "diseases", "biosamples",
                                                     "treatments", "medicalActions", "interpretations"};

void collect_narrative(const ojson& node, std::vector<std::string>& lines) {
    if (node.is_object()) {
        for (const auto& [key, value] : node.items()) {
            if (key == "metaData") continue;
            if ((key == "label" || key == "description") && value.is_string()) {
                const auto line = std::string(text::trim(value.get<std::string>()));
                if (!line.empty()) lines.push_back(line);
            } else {
                collect_narrative(value, lines);
            }
        }
    } else if (node.is_array()) {
        for (const auto& item : node) collect_narrative(item, lines);
    }
}

void collect_terms(const ojson& node, const std::string& section, std::vector<OntologyTerm>& terms) {
    if (node.is_object()) {
        auto id = node.find("id");
        if (id != node.end() && id->is_string()) {
            for (const char* name : {"label", "symbol"}) {
                auto label = node.find(name);
                if (label != node.end() && label->is_string()) {
                    OntologyTerm term{id->get<std::string>(), label->get<std::string>(), section};
                    const bool seen = std::any_of(terms.begin(), terms.end(), [&](const OntologyTerm& t) {
                        return t.id == term.id && t.label == term.label;
                    });
                    if (!seen) terms.push_back(std::move(term));
                    break;
                }
            }
        }
        for (const auto& [key, value] : node.items()) collect_terms(value, section, terms);
    } else if (node.is_array()) {
        for (const auto& item : node) collect_terms(item, section, terms);
    }
}

std::optional<std::string> duration_of(const ojson& holder) {
    // {"age": "P55Y"} or {"age": {"iso8601duration": "P55Y"}}
    if (!holder.is_object()) return std::nullopt;
    auto age = holder.find("age");
    if (age == holder.end()) return std::nullopt;
    if (age->is_string()) return age->get<std::string>();
    if (age->is_object()) {
        auto d = age->find("iso8601duration");
        if (d != age->end() && d->is_string()) return d->get<std::string>();
    }
    return std::nullopt;
}

std::optional<double> age_from_birth(const ojson& subject, const std::chrono::year_month_day& ref) {
    using namespace std::chrono;
    std::optional<int> year;
    unsigned month = 1;
    if (auto dob = subject.find("dateOfBirth"); dob != subject.end() && dob->is_string()) {
        auto date = parse_registry_date(dob->get<std::string>().substr(0, 10));
        if (date) {
            year = static_cast<int>(date->year());
            month = static_cast<unsigned>(date->month());
        }
    } else if (auto by = subject.find("birthYear"); by != subject.end() && by->is_number_integer()) {
        year = by->get<int>();
        if (auto bm = subject.find("birthMonth"); bm != subject.end() && bm->is_number_integer()) {
            month = static_cast<unsigned>(std::clamp(bm->get<int>(), 1, 12));
        }
    }
    if (!year) return std::nullopt;
    const int months = (static_cast<int>(ref.year()) - *year) * 12 +
                       (static_cast<int>(static_cast<unsigned>(ref.month())) - static_cast<int>(month));
    if (months < 0) return std::nullopt;
    return months / 12;  // completed years
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
    std::vector<std::string> out;
    for (const auto& item : j.at(key)) out.push_back(item.get<std::string>());
    return out;
}

void push_unique(std::vector<std::string>& list, std::unordered_set<std::string>& seen, std::string value) {
    if (value.empty()) return;
    if (seen.insert(value).second) list.push_back(std::move(value));
}

}  // namespace

std::optional<double> parse_iso8601_age(std::string_view duration) {
    auto s = text::trim(duration);
    if (s.size() < 2 || (s[0] != 'P' && s[0] != 'p')) return std::nullopt;
    s.remove_prefix(1);
    double years = 0;
    bool any = false;
    while (!s.empty()) {
        if (s[0] == 'T' || s[0] == 't') break;  // hours and below do not move an age
        std::size_t n = 0;
        while (n < s.size() && (std::isdigit(static_cast<unsigned char>(s[n])) || s[n] == '.')) ++n;
        if (n == 0 || n == s.size()) return std::nullopt;
        double value = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + n, value);
        if (ec != std::errc() || ptr != s.data() + n) return std::nullopt;
        switch (std::toupper(static_cast<unsigned char>(s[n]))) {
            case 'Y': years += value; break;
            case 'M': years += value / 12.0; break;
            case 'W': years += value / 52.0; break;
            case 'D': years += value / 365.25; break;
            default: return std::nullopt;
        }
        any = true;
        s.remove_prefix(n + 1);
    }
    if (!any) return std::nullopt;
    return years;
}

PatientProfile parse_phenopacket(std::string_view json_document, const PhenopacketOptions& options) {
    ojson doc;
    try {
        doc = ojson::parse(json_document);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::MalformedJson, std::string("phenopacket: ") + e.what());
    }
    if (!doc.is_object()) throw Error(Errc::MalformedJson, "phenopacket root must be an object");

    PatientProfile p;
    if (auto id = doc.find("id"); id != doc.end() && id->is_string()) p.packet_id = id->get<std::string>();

    auto subject_it = doc.find("subject");
    if (subject_it == doc.end() || !subject_it->is_object()) {
        throw Error(Errc::MissingSubjectId, "phenopacket has no subject");
    }
    const auto& subject = *subject_it;
    auto sid = subject.find("id");
    if (sid == subject.end() || !sid->is_string() || text::trim(sid->get<std::string>()).empty()) {
        throw Error(Errc::MissingSubjectId, "phenopacket subject has no id");
    }
    p.patient_id = std::string(text::trim(sid->get<std::string>()));

    if (auto sex = subject.find("sex"); sex != subject.end() && sex->is_string()) p.sex = parse_sex(sex->get<std::string>());

    for (const char* field : {"ageAtDiagnosis", "timeAtLastEncounter"}) {
        if (auto holder = subject.find(field); holder != subject.end()) {
            if (auto d = duration_of(*holder)) {
                p.age_years = parse_iso8601_age(*d);
                if (p.age_years) break;
            }
        }
    }
    if (!p.age_years && options.reference_date) p.age_years = age_from_birth(subject, *options.reference_date);

    std::vector<std::string> lines;
    collect_narrative(doc, lines);
    std::unordered_set<std::string> seen;
    for (auto& line : lines) {
        if (!seen.insert(line).second) continue;
        if (!p.narrative.empty()) p.narrative.push_back('\n');
        p.narrative += line;
    }

    for (const auto& [key, value] : doc.items()) {
        if (std::find(kTermSections.begin(), kTermSections.end(), key) != kTermSections.end()) {
            collect_terms(value, key, p.structured_terms);
        }
    }

    if (auto loc = doc.find("location"); loc != doc.end() && loc->is_object()) {
        p.location = Location{loc->value("country", ""), loc->value("city", "")};
    }
    return p;
}

void annotate_profile(PatientProfile& profile, const ConceptDictionary& dictionary,
                      std::vector<NormalizationDiagnostic>* diagnostics) {
    std::vector<NormalizationDiagnostic> local;
    profile.entities = annotate(profile.narrative, dictionary, diagnostics ? &local : nullptr);
    if (diagnostics) {
        for (auto& d : local) {
            d.source = profile.patient_id;
            diagnostics->push_back(std::move(d));
        }
    }
    enrich_synonyms(profile.entities, profile.synonyms, dictionary);
}

std::set<std::string> profile_concepts(const PatientProfile& profile, const ConceptDictionary* dictionary) {
    std::set<std::string> ids;
    for (const auto& e : profile.entities) {
        if (e.concept_id) ids.insert(*e.concept_id);
    }
    if (dictionary) {
        for (const auto& t : profile.structured_terms) {
            if (dictionary->find(t.id)) ids.insert(t.id);
        }
    }
    return ids;
}

void to_json(nlohmann::json& j, const PatientProfile& p) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : p.structured_terms) terms.push_back({{"id", t.id}, {"label", t.label}, {"section", t.section}});
    j = nlohmann::json{{"patient_id", p.patient_id},
                       {"packet_id", p.packet_id},
                       {"age_years", p.age_years ? nlohmann::json(*p.age_years) : nlohmann::json()},
                       {"sex", to_string(p.sex)},
                       {"narrative", p.narrative},
                       {"structured_terms", terms},
                       {"entities", p.entities},
                       {"synonyms", p.synonyms},
                       {"location", p.location ? nlohmann::json{{"country", p.location->country},
                                                                {"city", p.location->city}}
                                               : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, PatientProfile& p) {
    p.patient_id = j.at("patient_id").get<std::string>();
    if (p.patient_id.empty()) throw Error(Errc::MissingSubjectId, "profile JSON with empty patient_id");
    p.packet_id = j.value("packet_id", "");
    const auto age = j.value("age_years", nlohmann::json());
    p.age_years = age.is_number() ? std::optional<double>(age.get<double>()) : std::nullopt;
    p.sex = parse_sex(j.value("sex", "UNKNOWN"));
    p.narrative = j.value("narrative", "");
    p.structured_terms.clear();
    for (const auto& t : j.value("structured_terms", nlohmann::json::array())) {
        p.structured_terms.push_back({t.value("id", ""), t.value("label", ""), t.value("section", "")});
    }
    p.entities = j.value("entities", std::vector<EntityMention>{});
    p.synonyms = j.value("synonyms", std::vector<std::string>{});
    const auto loc = j.value("location", nlohmann::json());
    if (loc.is_object()) p.location = Location{loc.value("country", ""), loc.value("city", "")};
    else p.location.reset();
}

AugmenterOutput MockAugmenter::augment(const PatientProfile& profile) const {
    AugmenterOutput out;
    std::unordered_set<std::string> main_seen;
    std::unordered_set<std::string> other_seen;
    for (const auto& e : profile.entities) {
        if (e.entity_class.kind == EntityClass::Kind::Disease && e.normalized()) {
            push_unique(out.main_conditions, main_seen, text::clean_text(e.concept_label.value_or(e.surface)));
        }
    }
    if (out.main_conditions.empty()) {
        for (const auto& e : profile.entities) {
            if (e.entity_class.kind == EntityClass::Kind::Disease) {
                push_unique(out.main_conditions, main_seen, text::clean_text(e.surface));
            }
        }
    }
    if (out.main_conditions.empty()) {
        for (const auto& t : profile.structured_terms) {
            if (t.section == "diseases") push_unique(out.main_conditions, main_seen, text::clean_text(t.label));
        }
    }
    const auto sentences = text::split_sentences(profile.narrative);
    if (out.main_conditions.empty() && !sentences.empty()) {
        push_unique(out.main_conditions, main_seen, text::clean_text(sentences.front()));
    }
    for (const auto& e : profile.entities) {
        if (out.other_conditions.size() >= kMaxOtherConditions) break;
        auto label = text::clean_text(e.normalized() ? e.concept_label.value_or(e.surface) : e.surface);
        if (main_seen.contains(label)) continue;
        push_unique(out.other_conditions, other_seen, std::move(label));
    }
    out.expanded_sentences = sentences;
    return out;
}

std::optional<AugmenterOutput> parse_augmenter_completion(std::string_view completion) {
    const auto object = extract_json_object(completion);
    if (object.empty()) return std::nullopt;
    try {
        const auto j = nlohmann::json::parse(object);
        for (const char* key : {"main_conditions", "other_conditions", "expanded_sentences"}) {
            if (!j.contains(key) || !j[key].is_array()) return std::nullopt;
            for (const auto& item : j[key]) {
                if (!item.is_string()) return std::nullopt;
            }
        }
        AugmenterOutput out;
        out.main_conditions = string_list(j, "main_conditions");
        out.other_conditions = string_list(j, "other_conditions");
        out.expanded_sentences = string_list(j, "expanded_sentences");
        return out;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

LlmAugmenter::LlmAugmenter(std::shared_ptr<const ChatClient> client, int parse_retries, RetryPolicy transport)
    : client_(std::move(client)), parse_retries_(parse_retries), transport_(transport) {}

AugmenterOutput LlmAugmenter::augment(const PatientProfile& profile) const {
    InferenceRequest request;
    request.messages = {{"system", std::string(prompts::query_expansion())}, {"user", profile.narrative}};
    request.max_tokens = 2048;
    request.policy = transport_;
    for (int attempt = 0; attempt <= parse_retries_; ++attempt) {
        Completion completion;
        try {
            completion = client_->complete(request);
        } catch (const Error& e) {
            if (e.code() == Errc::BackendUnavailable || e.code() == Errc::Timeout) {
                throw Error(Errc::AugmenterUnavailable, std::string("query expansion backend: ") + e.what());
            }
            throw;
        }
        if (auto out = parse_augmenter_completion(completion.text)) {
            // the prompt allows a condition plus up to 10 aliases; the flat
            // list cannot be regrouped, so it is capped as a whole
            const std::size_t main_cap = kMaxSynonymsPerCondition * (kMaxSynonymsPerCondition + 1);
            if (out->main_conditions.size() > main_cap) out->main_conditions.resize(main_cap);
            if (out->other_conditions.size() > kMaxOtherConditions) out->other_conditions.resize(kMaxOtherConditions);
            return *out;
        }
    }
    throw Error(Errc::AugmenterMalformedOutput, "query expansion output missing required lists for patient " +
                                                    profile.patient_id);
}

std::vector<std::string> QueryBundle::lexical_terms() const {
    std::vector<std::string> terms;
    std::unordered_set<std::string> seen;
    for (const auto* list : {&expanded_sentences, &main_conditions, &other_conditions, &entity_terms}) {
        for (const auto& s : *list) {
            for (auto& token : text::lexical_tokens(s)) push_unique(terms, seen, std::move(token));
        }
    }
    return terms;
}

bool QueryBundle::empty() const { return lexical_terms().empty() && query_vectors.empty(); }

void to_json(nlohmann::json& j, const QueryBundle& b) {
    j = nlohmann::json{{"patient_id", b.patient_id},
                       {"main_conditions", b.main_conditions},
                       {"other_conditions", b.other_conditions},
                       {"expanded_sentences", b.expanded_sentences},
                       {"entity_terms", b.entity_terms},
                       {"query_vectors", b.query_vectors}};
}

void from_json(const nlohmann::json& j, QueryBundle& b) {
    b.patient_id = j.value("patient_id", "");
    b.main_conditions = j.value("main_conditions", std::vector<std::string>{});
    b.other_conditions = j.value("other_conditions", std::vector<std::string>{});
    b.expanded_sentences = j.value("expanded_sentences", std::vector<std::string>{});
    b.entity_terms = j.value("entity_terms", std::vector<std::string>{});
    b.query_vectors = j.value("query_vectors", std::vector<Vector>{});
}

QueryBundle expand_query(const PatientProfile& profile, const Augmenter& augmenter, const Embedder& embedder) {
    QueryBundle bundle;
    bundle.patient_id = profile.patient_id;
    if (text::trim(profile.narrative).empty()) return bundle;

    auto out = augmenter.augment(profile);
    bundle.main_conditions = std::move(out.main_conditions);
    bundle.other_conditions = std::move(out.other_conditions);
    bundle.expanded_sentences = std::move(out.expanded_sentences);
    bundle.entity_terms = profile.synonyms;

    std::vector<std::string> texts = bundle.expanded_sentences;
    texts.push_back(profile.narrative);
    bundle.query_vectors = embedder.embed_batch(texts);
    return bundle;
}

}  // namespace trialmatch
