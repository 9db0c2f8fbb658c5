#include "trialmatch/mock_backends.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

CriterionRelevance MockJudge::judge(const PatientStatement& statement, const Criterion& criterion) const {
    CriterionRelevance out{criterion.criterion_id, criterion.trial_id, 0.0, false};
    for (const auto& e : criterion.entities) {
        if (e.concept_id && statement.concepts.contains(*e.concept_id)) {
            out.relevance = 1.0;
            return out;
        }
    }
    const auto a = text::content_tokens(statement.text);
    const auto b = text::content_tokens(criterion.text);
    const std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> shared;
    for (const auto& t : b) {
        if (sa.contains(t)) shared.insert(t);
    }
    if (shared.size() >= 2) out.relevance = 1.0;
    return out;
}

MockRuleSet MockRuleSet::from_json(std::string_view content) {
    MockRuleSet set;
    try {
        const auto j = nlohmann::json::parse(content);
        for (const auto& [id, rule] : j.items()) {
            MockRule r;
            for (const auto& c : rule.value("requires", nlohmann::json::array())) r.requires_concepts.insert(c.get<std::string>());
            for (const auto& c : rule.value("forbids", nlohmann::json::array())) r.forbids_concepts.insert(c.get<std::string>());
            set.rules.emplace(id, std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedJson, std::string("mock rule set: ") + e.what());
    }
    return set;
}

std::string MockRuleSet::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, r] : rules) j[id] = {{"requires", r.requires_concepts}, {"forbids", r.forbids_concepts}};
    return j.dump(2);
}

MockReasoner::MockReasoner(const ConceptDictionary* dictionary, MockRuleSet rules)
    : dictionary_(dictionary), rules_(std::move(rules)) {}

std::string MockReasoner::label_of(const std::string& concept_id) const {
    if (dictionary_) {
        if (const auto* c = dictionary_->find(concept_id)) return c->label;
    }
    return concept_id;
}

std::string MockReasoner::reason(const ReasoningInput& input) const {
    const auto patient = profile_concepts(input.profile, dictionary_);
    auto join_labels = [&](const std::vector<std::string>& ids) {
        std::string s;
        for (const auto& id : ids) {
            if (!s.empty()) s += ", ";
            s += label_of(id) + " (" + id + ")";
        }
        return s;
    };

    nlohmann::ordered_json inc = nlohmann::ordered_json::array();
    nlohmann::ordered_json exc = nlohmann::ordered_json::array();
    std::size_t met = 0, not_met = 0, violated = 0, unclear = 0, total = 0;
    for (const auto& c : input.trial.criteria) {
        static const MockRule kNoRule;
        const auto it = rules_.rules.find(c.criterion_id);
        const MockRule& rule = it != rules_.rules.end() ? it->second : kNoRule;
        std::vector<std::string> present_forbidden;
        std::vector<std::string> missing_required;
        std::vector<std::string> present_required;
        for (const auto& id : rule.forbids_concepts) {
            if (patient.contains(id)) present_forbidden.push_back(id);
        }
        for (const auto& id : rule.requires_concepts) {
            (patient.contains(id) ? present_required : missing_required).push_back(id);
        }

        Classification cls = Classification::Unclear;
        std::string why;
        if (c.kind == CriterionKind::Inclusion) {
            if (!present_forbidden.empty()) {
                cls = Classification::NotMet;
                why = "Patient record documents " + join_labels(present_forbidden) + ", which this criterion rules out.";
            } else if (!present_required.empty()) {
                cls = Classification::Met;
                why = "Patient record documents " + join_labels(present_required) + ".";
            } else if (!rule.requires_concepts.empty()) {
                why = "No evidence in the patient record for " + join_labels(missing_required) + ".";
            } else {
                why = "The patient record does not address this criterion.";
            }
        } else {
            if (!present_forbidden.empty()) {
                cls = Classification::Violated;
                why = "Patient record documents " + join_labels(present_forbidden) + ".";
            } else if (!rule.forbids_concepts.empty()) {
                cls = Classification::NotViolated;
                std::vector<std::string> ids(rule.forbids_concepts.begin(), rule.forbids_concepts.end());
                why = "Patient record shows none of " + join_labels(ids) + ".";
            } else {
                why = "The patient record does not address this criterion.";
            }
        }

        ++total;
        if (cls == Classification::Met) ++met;
        if (cls == Classification::NotMet) ++not_met;
        if (cls == Classification::Violated) ++violated;
        if (cls == Classification::Unclear) ++unclear;

        nlohmann::ordered_json item;
        item["Criterion"] = c.text;
        item["Classification"] = display_name(cls);
        item["Justification"] = why;
        (c.kind == CriterionKind::Inclusion ? inc : exc).push_back(std::move(item));
    }

    FinalDecision decision = FinalDecision::LikelyEligible;
    if (not_met + violated > 0) decision = FinalDecision::Ineligible;
    else if (unclear == 0 && total > 0) decision = FinalDecision::Eligible;

    nlohmann::ordered_json out;
    out["Inclusion_Criteria_Evaluation"] = inc;
    out["Exclusion_Criteria_Evaluation"] = exc;
    out["Recap"] = std::to_string(met) + " inclusion criteria met, " + std::to_string(not_met) + " not met, " +
                   std::to_string(violated) + " exclusion criteria violated, " + std::to_string(unclear) +
                   " unclear.";
    out["Final Decision"] = display_name(decision);
    return out.dump(2);
}

}  // namespace trialmatch
