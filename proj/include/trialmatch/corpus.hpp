#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialmatch/entity.hpp"

namespace trialmatch {

enum class CriterionKind { Inclusion, Exclusion };
enum class SexEligibility { All, Male, Female };

std::string_view to_string(CriterionKind kind);
std::string_view to_string(SexEligibility sex);

/// Registry recruitment status. Labels outside the three known values are kept
/// as Other with the source label.
struct TrialStatus {
    enum class Kind { Recruiting, Completed, Withdrawn, Other };
    Kind kind = Kind::Other;
    std::string label;

    static TrialStatus parse(std::string_view label);
    std::string name() const;

    friend bool operator==(const TrialStatus&, const TrialStatus&) = default;
};

struct Location {
    std::string country;
    std::string city;
    friend bool operator==(const Location&, const Location&) = default;
};

struct Criterion {
    std::string criterion_id;
    std::string trial_id;
    CriterionKind kind = CriterionKind::Inclusion;
    std::string text;
    std::size_t sequence_number = 0;
    std::size_t indent_level = 0;
    std::optional<std::string> parent_id;
    std::vector<EntityMention> entities;
    std::vector<std::string> synonyms;
    std::optional<std::vector<float>> embedding;

    friend bool operator==(const Criterion&, const Criterion&) = default;
};

struct Trial {
    std::string nct_id;
    std::string brief_title;
    std::string official_title;
    std::string summary;
    std::string detailed_description;
    std::vector<std::string> conditions;
    std::optional<std::chrono::year_month_day> start_date;
    std::optional<std::chrono::year_month_day> end_date;
    std::vector<Location> locations;
    std::optional<double> min_age_years;
    std::optional<double> max_age_years;
    SexEligibility sex_eligibility = SexEligibility::All;
    TrialStatus overall_status;
    std::string eligibility_text;  // raw block, pre-segmentation
    std::vector<Criterion> criteria;
    // trial-level enrichment (title/summary/conditions)
    std::vector<EntityMention> entities;
    std::vector<std::string> synonyms;

    /// Title, summary, description and conditions joined for trial-level indexing.
    std::string index_text() const;

    friend bool operator==(const Trial&, const Trial&) = default;
};

/// Parses one clinicaltrials.gov-style `<clinical_study>` record. Criteria are
/// left empty; the raw eligibility block goes to `eligibility_text`.
Trial parse_trial_xml(std::string_view xml_document);

/// "18 Years", "6 Months", "2 Weeks", "30 Days" -> years. "N/A" and
/// unparseable strings yield nullopt.
std::optional<double> parse_age_years(std::string_view text);

/// "March 15, 2012", "January 2010", "2012-03-15" -> date (day 1 when absent).
std::optional<std::chrono::year_month_day> parse_registry_date(std::string_view text);

std::pair<std::string, std::string> split_inclusion_exclusion(std::string_view eligibility_block);

/// One segmentation unit before cleaning; exposed for property checks.
struct RawSegment {
    std::string raw_text;  // marker stripped, not cleaned
    std::size_t indent_level = 0;
    std::optional<std::size_t> parent;  // index into the returned vector
};

std::vector<RawSegment> segment_raw(std::string_view section_text);

std::vector<Criterion> segment_criteria(std::string_view section_text, CriterionKind kind,
                                        std::string_view trial_id);

/// split_inclusion_exclusion + segment_criteria over trial.eligibility_text.
void segment_trial(Trial& trial);

std::string criterion_id(std::string_view trial_id, CriterionKind kind, std::size_t sequence);

void to_json(nlohmann::json& j, const Criterion& c);
void from_json(const nlohmann::json& j, Criterion& c);
void to_json(nlohmann::json& j, const Trial& t);
void from_json(const nlohmann::json& j, Trial& t);

/// Canonical interchange: JSON Lines, one trial object per line.
std::vector<Trial> read_trials_jsonl(std::string_view content);
std::string write_trials_jsonl(const std::vector<Trial>& trials);

}  // namespace trialmatch
