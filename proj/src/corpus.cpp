#include "trialmatch/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

namespace pt = boost::property_tree;

std::string_view to_string(CriterionKind kind) {
    return kind == CriterionKind::Inclusion ? "INCLUSION" : "EXCLUSION";
}

std::string_view to_string(SexEligibility sex) {
    switch (sex) {
        case SexEligibility::Male: return "MALE";
        case SexEligibility::Female: return "FEMALE";
        case SexEligibility::All: return "ALL";
    }
    return "ALL";
}

namespace {

SexEligibility parse_sex_eligibility(std::string_view s) {
    const auto key = text::to_lower_ascii(text::trim(s));
    if (key == "male") return SexEligibility::Male;
    if (key == "female") return SexEligibility::Female;
    return SexEligibility::All;
}

CriterionKind parse_kind(std::string_view s) {
    if (s == "INCLUSION") return CriterionKind::Inclusion;
    if (s == "EXCLUSION") return CriterionKind::Exclusion;
    throw Error(Errc::MalformedJson, "unknown criterion kind " + std::string(s));
}

std::string child_text(const pt::ptree& node, const std::string& path) {
    if (auto child = node.get_child_optional(path)) return child->data();
    return {};
}

}  // namespace

TrialStatus TrialStatus::parse(std::string_view label) {
    const auto trimmed = std::string(text::trim(label));
    const auto key = text::to_lower_ascii(trimmed);
    if (key == "recruiting") return {Kind::Recruiting, {}};
    if (key == "completed") return {Kind::Completed, {}};
    if (key == "withdrawn") return {Kind::Withdrawn, {}};
    return {Kind::Other, trimmed};
}

std::string TrialStatus::name() const {
    switch (kind) {
        case Kind::Recruiting: return "RECRUITING";
        case Kind::Completed: return "COMPLETED";
        case Kind::Withdrawn: return "WITHDRAWN";
        case Kind::Other: return "OTHER";
    }
    return "OTHER";
}

std::string Trial::index_text() const {
    std::string out = brief_title;
    for (const auto* part : {&official_title, &summary, &detailed_description}) {
        if (part->empty()) continue;
        if (!out.empty()) out += '\n';
        out += *part;
    }
    for (const auto& c : conditions) {
        if (!out.empty()) out += '\n';
        out += c;
    }
    return out;
}

std::optional<double> parse_age_years(std::string_view raw) {
    const auto s = text::trim(raw);
    double value = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first || value < 0) return std::nullopt;
    const auto unit = text::to_lower_ascii(text::trim(std::string_view(ptr, static_cast<std::size_t>(last - ptr))));
    if (unit.starts_with("year")) return value;
    if (unit.starts_with("month")) return value / 12.0;
    if (unit.starts_with("week")) return value / 52.0;
    if (unit.starts_with("day")) return value / 365.25;
    if (unit.starts_with("hour")) return value / (365.25 * 24.0);
    if (unit.starts_with("minute")) return value / (365.25 * 24.0 * 60.0);
    if (unit.empty()) return value;
    return std::nullopt;
}

std::optional<std::chrono::year_month_day> parse_registry_date(std::string_view raw) {
    using namespace std::chrono;
    const auto s = std::string(text::trim(raw));
    if (s.empty()) return std::nullopt;
    int y = 0;
    unsigned m = 0;
    unsigned d = 1;
    if (std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) >= 2) {
        year_month_day ymd{year{y}, month{m}, day{d}};
        return ymd.ok() ? std::optional(ymd) : std::nullopt;
    }
    static constexpr std::array<std::string_view, 12> kMonths = {
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
    std::istringstream in(s);
    std::string month_word;
    in >> month_word;
    const auto lowered = text::to_lower_ascii(month_word);
    for (std::size_t i = 0; i < kMonths.size(); ++i) {
        if (lowered.starts_with(kMonths[i])) m = static_cast<unsigned>(i + 1);
    }
    if (m == 0) return std::nullopt;
    std::string rest;
    std::getline(in, rest);
    std::erase(rest, ',');
    std::istringstream nums(rest);
    std::vector<int> values;
    for (int v = 0; nums >> v;) values.push_back(v);
    if (values.size() == 1) {
        y = values[0];
    } else if (values.size() == 2) {
        d = static_cast<unsigned>(values[0]);
        y = values[1];
    } else {
        return std::nullopt;
    }
    year_month_day ymd{year{y}, month{m}, day{d}};
    return ymd.ok() ? std::optional(ymd) : std::nullopt;
}

Trial parse_trial_xml(std::string_view xml_document) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml_document)};
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw Error(Errc::MalformedXml, e.what());
    }
    auto root_opt = tree.get_child_optional("clinical_study");
    if (!root_opt) throw Error(Errc::MalformedXml, "expected <clinical_study> root element");
    const auto& root = *root_opt;

    Trial trial;
    trial.nct_id = std::string(text::trim(child_text(root, "id_info.nct_id")));
    if (trial.nct_id.empty()) trial.nct_id = std::string(text::trim(child_text(root, "nct_id")));
    if (trial.nct_id.empty()) throw Error(Errc::MissingIdentifier, "record has no nct_id element");

    trial.brief_title = text::clean_text(child_text(root, "brief_title"));
    trial.official_title = text::clean_text(child_text(root, "official_title"));
    trial.summary = text::clean_text(child_text(root, "brief_summary.textblock"));
    trial.detailed_description = text::clean_text(child_text(root, "detailed_description.textblock"));
    trial.start_date = parse_registry_date(child_text(root, "start_date"));
    trial.end_date = parse_registry_date(child_text(root, "completion_date"));
    if (!trial.end_date) trial.end_date = parse_registry_date(child_text(root, "primary_completion_date"));

    for (const auto& [key, child] : root) {
        if (key == "condition") {
            auto c = text::clean_text(child.data());
            if (!c.empty()) trial.conditions.push_back(std::move(c));
        } else if (key == "location") {
            Location loc;
            loc.country = std::string(text::trim(child_text(child, "facility.address.country")));
            loc.city = std::string(text::trim(child_text(child, "facility.address.city")));
            if (!loc.country.empty() || !loc.city.empty()) trial.locations.push_back(std::move(loc));
        }
    }

    const auto eligibility = root.get_child_optional("eligibility");
    auto eligibility_field = [&](const std::string& name) {
        auto v = eligibility ? child_text(*eligibility, name) : std::string{};
        return v.empty() ? child_text(root, name) : v;
    };
    trial.eligibility_text = eligibility ? child_text(*eligibility, "criteria.textblock") : std::string{};
    trial.sex_eligibility = parse_sex_eligibility(eligibility_field("gender"));
    trial.min_age_years = parse_age_years(eligibility_field("minimum_age"));
    trial.max_age_years = parse_age_years(eligibility_field("maximum_age"));
    if (trial.min_age_years && trial.max_age_years && *trial.min_age_years > *trial.max_age_years) {
        throw Error(Errc::MalformedXml, trial.nct_id + ": minimum_age exceeds maximum_age");
    }
    trial.overall_status = TrialStatus::parse(child_text(root, "overall_status"));
    return trial;
}

// ---------------------------------------------------------------------------
// Inclusion / exclusion split

namespace {

std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '\n') {
            lines.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return lines;
}

std::string normalize_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

// Drops leading blank lines and trailing whitespace, keeping the indentation
// of the first non-blank line.
std::string strip_section(const std::string& s) {
    std::size_t line_start = 0;
    std::size_t start = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\n') {
            line_start = i + 1;
        } else if (s[i] != ' ' && s[i] != '\t') {
            start = line_start;
            break;
        }
    }
    std::size_t end = s.size();
    while (end > start && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\n')) --end;
    return s.substr(start, end - start);
}

// Returns the remainder of the line after a header, or nullopt if the line is
// not a header.
std::optional<std::string_view> match_header(std::string_view line, std::string_view phrase) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (line.size() - i < phrase.size()) return std::nullopt;
    if (text::to_lower_ascii(line.substr(i, phrase.size())) != phrase) return std::nullopt;
    i += phrase.size();
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i < line.size() && line[i] == ':') ++i;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return line.substr(i);
}

}  // namespace

std::pair<std::string, std::string> split_inclusion_exclusion(std::string_view eligibility_block) {
    const auto normalized = normalize_newlines(eligibility_block);
    std::string inclusion;
    std::string exclusion;
    std::string* target = &inclusion;
    for (auto line : split_lines(normalized)) {
        if (auto rest = match_header(line, "inclusion criteria")) {
            target = &inclusion;
            if (!rest->empty()) (*target).append(*rest).push_back('\n');
            continue;
        }
        if (auto rest = match_header(line, "exclusion criteria")) {
            target = &exclusion;
            if (!rest->empty()) (*target).append(*rest).push_back('\n');
            continue;
        }
        target->append(line).push_back('\n');
    }
    return {strip_section(inclusion), strip_section(exclusion)};
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

constexpr std::size_t kMinFragmentTokens = 3;
constexpr std::size_t kTabWidth = 4;

struct MarkerMatch {
    bool found = false;
    std::string_view content;
};

bool is_blank(char c) { return c == ' ' || c == '\t'; }

MarkerMatch match_marker(std::string_view rest) {
    auto after = [&](std::size_t pos, bool need_space) -> MarkerMatch {
        if (pos < rest.size() && !is_blank(rest[pos])) {
            if (need_space) return {};
        }
        while (pos < rest.size() && is_blank(rest[pos])) ++pos;
        return {true, rest.substr(pos)};
    };
    if (rest.empty()) return {};
    const auto c0 = static_cast<unsigned char>(rest[0]);
    // numeric: 1-3 digits then '.' or ')'
    if (c0 >= '0' && c0 <= '9') {
        std::size_t i = 0;
        while (i < rest.size() && i < 4 && rest[i] >= '0' && rest[i] <= '9') ++i;
        if (i <= 3 && i < rest.size() && (rest[i] == '.' || rest[i] == ')')) return after(i + 1, true);
        return {};
    }
    // alphabetic: single letter then '.' or ')'
    if ((c0 >= 'a' && c0 <= 'z') || (c0 >= 'A' && c0 <= 'Z')) {
        if (rest.size() >= 2 && (rest[1] == '.' || rest[1] == ')')) return after(2, true);
        return {};
    }
    if (c0 == '-' || c0 == '*') return after(1, true);
    if (rest.starts_with("•") || rest.starts_with("→")) return after(3, false);
    return {};
}

std::size_t token_count(std::string_view s) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : s) {
        const bool space = c == ' ' || c == '\t' || c == '\n';
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

struct Item {
    std::size_t indent = 0;
    std::string text;
    bool marked = false;
};

bool ascii_upper_or_digit(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

std::vector<std::string> split_at_sentence_boundaries(const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 2 < s.size(); ++i) {
        if (s[i] == '.' && s[i + 1] == ' ' && ascii_upper_or_digit(s[i + 2])) {
            parts.push_back(s.substr(start, i + 1 - start));
            start = i + 2;
        }
    }
    parts.push_back(s.substr(start));
    return parts;
}

}  // namespace

std::vector<RawSegment> segment_raw(std::string_view section_text) {
    const auto normalized = normalize_newlines(section_text);

    // Stage 1: split at list markers, repair broken lines.
    std::vector<Item> items;
    bool open = false;
    bool any_marker = false;
    for (auto line : split_lines(normalized)) {
        std::size_t indent = 0;
        std::size_t i = 0;
        while (i < line.size() && is_blank(line[i])) {
            indent += line[i] == '\t' ? kTabWidth : 1;
            ++i;
        }
        auto rest = line.substr(i);
        while (!rest.empty() && is_blank(rest.back())) rest.remove_suffix(1);
        if (rest.empty()) {
            open = false;
            continue;
        }
        if (auto m = match_marker(rest); m.found) {
            items.push_back({indent, std::string(m.content), true});
            open = true;
            any_marker = true;
            continue;
        }
        if (open && (!items.back().marked || indent > items.back().indent)) {
            auto& text = items.back().text;
            if (!text.empty()) text.push_back(' ');
            text.append(rest);
            continue;
        }
        items.push_back({indent, std::string(rest), false});
        open = true;
    }

    if (!any_marker) {
        std::vector<Item> split;
        for (auto& item : items) {
            for (auto& part : split_at_sentence_boundaries(item.text)) {
                split.push_back({item.indent, std::move(part), false});
            }
        }
        items = std::move(split);
    }

    // Short-fragment consolidation. A marked sub-item ("  - chemotherapy")
    // is a criterion in its own right and is never absorbed. Levels are
    // tracked over the kept items only, exactly as stage 2 sees them.
    std::vector<Item> merged;
    std::vector<std::size_t> kept_widths;
    for (auto& item : items) {
        if (text::clean_text(item.text).empty()) continue;
        std::size_t depth = kept_widths.size();
        while (depth > 0 && kept_widths[depth - 1] > item.indent) --depth;
        const std::size_t level = depth > 0 && kept_widths[depth - 1] == item.indent ? depth - 1 : depth;
        const bool nested_item = item.marked && level > 0;
        if (!merged.empty() && !nested_item && token_count(item.text) < kMinFragmentTokens) {
            merged.back().text.push_back(' ');
            merged.back().text += item.text;
            continue;
        }
        kept_widths.resize(depth);
        if (kept_widths.empty() || kept_widths.back() < item.indent) kept_widths.push_back(item.indent);
        merged.push_back(std::move(item));
    }

    // Stage 2: indentation -> nesting.
    std::vector<RawSegment> out;
    std::vector<std::size_t> widths;
    for (auto& item : merged) {
        while (!widths.empty() && widths.back() > item.indent) widths.pop_back();
        if (widths.empty() || widths.back() < item.indent) widths.push_back(item.indent);
        RawSegment seg;
        seg.raw_text = std::move(item.text);
        seg.indent_level = widths.size() - 1;
        for (std::size_t j = out.size(); j-- > 0;) {
            if (out[j].indent_level < seg.indent_level) {
                seg.parent = j;
                break;
            }
        }
        out.push_back(std::move(seg));
    }
    return out;
}

std::string criterion_id(std::string_view trial_id, CriterionKind kind, std::size_t sequence) {
    std::string id(trial_id);
    id += kind == CriterionKind::Inclusion ? "_inc_" : "_exc_";
    id += std::to_string(sequence);
    return id;
}

std::vector<Criterion> segment_criteria(std::string_view section_text, CriterionKind kind,
                                        std::string_view trial_id) {
    const auto segments = segment_raw(section_text);
    std::vector<Criterion> criteria;
    criteria.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        Criterion c;
        c.trial_id = std::string(trial_id);
        c.kind = kind;
        c.sequence_number = i;
        c.criterion_id = criterion_id(trial_id, kind, i);
        c.text = text::clean_text(segments[i].raw_text);
        c.indent_level = segments[i].indent_level;
        if (segments[i].parent) c.parent_id = criterion_id(trial_id, kind, *segments[i].parent);
        criteria.push_back(std::move(c));
    }
    return criteria;
}

void segment_trial(Trial& trial) {
    auto [inclusion, exclusion] = split_inclusion_exclusion(trial.eligibility_text);
    trial.criteria = segment_criteria(inclusion, CriterionKind::Inclusion, trial.nct_id);
    auto exc = segment_criteria(exclusion, CriterionKind::Exclusion, trial.nct_id);
    trial.criteria.insert(trial.criteria.end(), std::make_move_iterator(exc.begin()),
                          std::make_move_iterator(exc.end()));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json date_json(const std::optional<std::chrono::year_month_day>& d) {
    if (!d) return nullptr;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d->year()),
                  static_cast<unsigned>(d->month()), static_cast<unsigned>(d->day()));
    return buf;
}

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

template <typename T>
std::optional<T> opt_get(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const Criterion& c) {
    j = nlohmann::json{{"criterion_id", c.criterion_id},
                       {"trial_id", c.trial_id},
                       {"kind", to_string(c.kind)},
                       {"text", c.text},
                       {"sequence_number", c.sequence_number},
                       {"indent_level", c.indent_level},
                       {"parent_id", opt_json(c.parent_id)},
                       {"entities", c.entities},
                       {"synonyms", c.synonyms},
                       {"embedding", opt_json(c.embedding)}};
}

void from_json(const nlohmann::json& j, Criterion& c) {
    c.criterion_id = j.at("criterion_id").get<std::string>();
    c.trial_id = j.at("trial_id").get<std::string>();
    c.kind = parse_kind(j.at("kind").get<std::string>());
    c.text = j.at("text").get<std::string>();
    c.sequence_number = j.at("sequence_number").get<std::size_t>();
    c.indent_level = j.at("indent_level").get<std::size_t>();
    c.parent_id = opt_get<std::string>(j, "parent_id");
    c.entities = j.value("entities", std::vector<EntityMention>{});
    c.synonyms = j.value("synonyms", std::vector<std::string>{});
    c.embedding = opt_get<std::vector<float>>(j, "embedding");
}

void to_json(nlohmann::json& j, const Trial& t) {
    nlohmann::json locations = nlohmann::json::array();
    for (const auto& loc : t.locations) locations.push_back({{"country", loc.country}, {"city", loc.city}});
    j = nlohmann::json{{"nct_id", t.nct_id},
                       {"brief_title", t.brief_title},
                       {"official_title", t.official_title},
                       {"summary", t.summary},
                       {"detailed_description", t.detailed_description},
                       {"conditions", t.conditions},
                       {"start_date", date_json(t.start_date)},
                       {"end_date", date_json(t.end_date)},
                       {"locations", locations},
                       {"min_age_years", opt_json(t.min_age_years)},
                       {"max_age_years", opt_json(t.max_age_years)},
                       {"sex_eligibility", to_string(t.sex_eligibility)},
                       {"overall_status", t.overall_status.name()},
                       {"overall_status_label", t.overall_status.label},
                       {"eligibility_text", t.eligibility_text},
                       {"entities", t.entities},
                       {"synonyms", t.synonyms},
                       {"criteria", t.criteria}};
}

void from_json(const nlohmann::json& j, Trial& t) {
    t.nct_id = j.at("nct_id").get<std::string>();
    if (t.nct_id.empty()) throw Error(Errc::MissingIdentifier, "trial JSON with empty nct_id");
    t.brief_title = j.value("brief_title", "");
    t.official_title = j.value("official_title", "");
    t.summary = j.value("summary", "");
    t.detailed_description = j.value("detailed_description", "");
    t.conditions = j.value("conditions", std::vector<std::string>{});
    t.start_date = parse_registry_date(j.value("start_date", nlohmann::json()).is_string()
                                           ? j["start_date"].get<std::string>()
                                           : std::string{});
    t.end_date = parse_registry_date(j.value("end_date", nlohmann::json()).is_string()
                                         ? j["end_date"].get<std::string>()
                                         : std::string{});
    t.locations.clear();
    for (const auto& loc : j.value("locations", nlohmann::json::array())) {
        t.locations.push_back({loc.value("country", ""), loc.value("city", "")});
    }
    t.min_age_years = opt_get<double>(j, "min_age_years");
    t.max_age_years = opt_get<double>(j, "max_age_years");
    t.sex_eligibility = parse_sex_eligibility(j.value("sex_eligibility", "ALL"));
    const auto status = j.value("overall_status", "OTHER");
    t.overall_status = status == "OTHER" ? TrialStatus{TrialStatus::Kind::Other, j.value("overall_status_label", "")}
                                         : TrialStatus::parse(status);
    t.eligibility_text = j.value("eligibility_text", "");
    t.entities = j.value("entities", std::vector<EntityMention>{});
    t.synonyms = j.value("synonyms", std::vector<std::string>{});
    t.criteria = j.value("criteria", std::vector<Criterion>{});
}

std::vector<Trial> read_trials_jsonl(std::string_view content) {
    std::vector<Trial> trials;
    std::size_t line_no = 0;
    for (auto line : split_lines(content)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            trials.push_back(nlohmann::json::parse(line).get<Trial>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::MalformedJson, "trials line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trials;
}

std::string write_trials_jsonl(const std::vector<Trial>& trials) {
    std::string out;
    for (const auto& t : trials) {
        out += nlohmann::json(t).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out.push_back('\n');
    }
    return out;
}

}  // namespace trialmatch
