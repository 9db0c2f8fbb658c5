#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "trialmatch/normalize.hpp"
#include "trialmatch/rank.hpp"

namespace trialmatch {

/// Relevance 1 when the criterion shares a linked concept, or at least two
/// content tokens, with the statement; otherwise 0.
class MockJudge final : public RelevanceJudge {
public:
    CriterionRelevance judge(const PatientStatement& statement, const Criterion& criterion) const override;
};

struct MockRule {
    std::set<std::string> requires_concepts;
    std::set<std::string> forbids_concepts;
};

/// criterion_id -> rule. Loaded from {"<criterion_id>": {"requires": [..],
/// "forbids": [..]}}.
struct MockRuleSet {
    std::map<std::string, MockRule> rules;

    static MockRuleSet from_json(std::string_view content);
    std::string to_json() const;
};

/// Emits the eligibility JSON from concept rules keyed by criterion id.
/// Inclusion: NOT_MET when a forbidden concept is present, else MET when any
/// required one is. Exclusion: VIOLATED when any forbidden concept is
/// present, NOT_VIOLATED otherwise. Unannotated criteria, or nothing to
/// check, give UNCLEAR.
class MockReasoner final : public Reasoner {
public:
    explicit MockReasoner(const ConceptDictionary* dictionary = nullptr, MockRuleSet rules = {});
    std::string reason(const ReasoningInput& input) const override;

private:
    std::string label_of(const std::string& concept_id) const;

    const ConceptDictionary* dictionary_;
    MockRuleSet rules_;
};

}  // namespace trialmatch
