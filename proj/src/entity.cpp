#include "trialmatch/entity.hpp"

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

EntityClass EntityClass::parse(std::string_view name) {
    const auto key = text::to_lower_ascii(text::trim(name));
    if (key == "disease") return {Kind::Disease, {}};
    if (key == "gene_protein_mutation" || key == "gene" || key == "protein" || key == "mutation")
        return {Kind::GeneProteinMutation, {}};
    if (key == "drug_chemical" || key == "drug" || key == "chemical") return {Kind::DrugChemical, {}};
    if (key == "procedure") return {Kind::Procedure, {}};
    if (key == "symptom") return {Kind::Symptom, {}};
    if (key == "cell_type") return {Kind::CellType, {}};
    return {Kind::Other, std::string(text::trim(name))};
}

std::string EntityClass::name() const {
    switch (kind) {
        case Kind::Disease: return "disease";
        case Kind::GeneProteinMutation: return "gene_protein_mutation";
        case Kind::DrugChemical: return "drug_chemical";
        case Kind::Procedure: return "procedure";
        case Kind::Symptom: return "symptom";
        case Kind::CellType: return "cell_type";
        case Kind::Other: return other_label.empty() ? "other" : other_label;
    }
    return "other";
}

std::string_view to_string(Sieve sieve) {
    switch (sieve) {
        case Sieve::Exact: return "EXACT";
        case Sieve::Synonym: return "SYNONYM";
        case Sieve::Abbreviation: return "ABBREVIATION";
    }
    return "EXACT";
}

std::optional<Sieve> parse_sieve(std::string_view name) {
    if (name == "EXACT") return Sieve::Exact;
    if (name == "SYNONYM") return Sieve::Synonym;
    if (name == "ABBREVIATION") return Sieve::Abbreviation;
    return std::nullopt;
}

void to_json(nlohmann::json& j, const EntityMention& m) {
    j = nlohmann::json{{"surface", m.surface},
                       {"span", {m.begin, m.end}},
                       {"entity_class", m.entity_class.name()},
                       {"concept_id", m.concept_id ? nlohmann::json(*m.concept_id) : nlohmann::json()},
                       {"concept_label", m.concept_label ? nlohmann::json(*m.concept_label) : nlohmann::json()},
                       {"sieve_used", m.sieve_used ? nlohmann::json(to_string(*m.sieve_used)) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, EntityMention& m) {
    m.surface = j.at("surface").get<std::string>();
    const auto& span = j.at("span");
    m.begin = span.at(0).get<std::size_t>();
    m.end = span.at(1).get<std::size_t>();
    m.entity_class = EntityClass::parse(j.at("entity_class").get<std::string>());
    m.concept_id.reset();
    m.concept_label.reset();
    m.sieve_used.reset();
    if (auto it = j.find("concept_id"); it != j.end() && it->is_string()) m.concept_id = it->get<std::string>();
    if (auto it = j.find("concept_label"); it != j.end() && it->is_string())
        m.concept_label = it->get<std::string>();
    if (auto it = j.find("sieve_used"); it != j.end() && it->is_string()) {
        m.sieve_used = parse_sieve(it->get<std::string>());
        if (!m.sieve_used) throw Error(Errc::MalformedJson, "unknown sieve " + it->get<std::string>());
    }
}

}  // namespace trialmatch
