#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace trialmatch {

/// Entity categories recognized by the tagger. Unknown dictionary classes are
/// kept verbatim as Other.
struct EntityClass {
    enum class Kind { Disease, GeneProteinMutation, DrugChemical, Procedure, Symptom, CellType, Other };

    Kind kind = Kind::Other;
    std::string other_label;

    static EntityClass parse(std::string_view name);
    std::string name() const;

    friend bool operator==(const EntityClass&, const EntityClass&) = default;
};

enum class Sieve { Exact, Synonym, Abbreviation };

std::string_view to_string(Sieve sieve);
std::optional<Sieve> parse_sieve(std::string_view name);

struct EntityMention {
    std::string surface;
    std::size_t begin = 0;  // byte offsets into the source text, half-open
    std::size_t end = 0;
    EntityClass entity_class;
    std::optional<std::string> concept_id;
    std::optional<std::string> concept_label;
    std::optional<Sieve> sieve_used;

    bool normalized() const { return concept_id.has_value(); }

    friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

void to_json(nlohmann::json& j, const EntityMention& m);
void from_json(const nlohmann::json& j, EntityMention& m);

}  // namespace trialmatch
