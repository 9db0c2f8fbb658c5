#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "trialmatch/error.hpp"
#include "trialmatch/patient.hpp"
#include "trialmatch/synthetic.hpp"

using namespace trialmatch;

namespace {

std::string fixture() {
    std::ifstream in(std::filesystem::path(TRIALMATCH_TEST_DATA) / "phenopacket_example.json");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ConceptDictionary dictionary() {
    return ConceptDictionary({
        Concept{"NCIT:C4872", "breast carcinoma", EntityClass::parse("disease"), {"breast cancer"}},
        Concept{"NCIT:C1647", "trastuzumab", EntityClass::parse("drug"), {"herceptin"}},
        Concept{"HGNC:1100", "BRCA1", EntityClass::parse("gene"), {}},
    });
}

class ScriptedClient : public ChatClient {
public:
    explicit ScriptedClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    Completion complete(const InferenceRequest& request) const override {
        std::lock_guard lock(mu_);
        requests.push_back(request);
        const auto& r = replies_[std::min(calls_++, replies_.size() - 1)];
        return Completion{r, std::nullopt};
    }
    mutable std::vector<InferenceRequest> requests;

private:
    std::vector<std::string> replies_;
    mutable std::size_t calls_ = 0;
    mutable std::mutex mu_;
};

class CountingAugmenter : public Augmenter {
public:
    AugmenterOutput augment(const PatientProfile& p) const override {
        ++calls;
        return MockAugmenter().augment(p);
    }
    mutable std::atomic<int> calls{0};
};

}  // namespace

TEST(Phenopacket, FixtureMatchesGeneratorCopy) { EXPECT_EQ(fixture(), synthetic::example_phenopacket()); }

TEST(Phenopacket, TemplateFields) {
    const auto p = parse_phenopacket(fixture());
    EXPECT_EQ(p.patient_id, "patient-001");
    EXPECT_EQ(p.packet_id, "cancer-patient-example-001");
    EXPECT_EQ(p.sex, Sex::Female);
    ASSERT_TRUE(p.age_years);
    EXPECT_DOUBLE_EQ(*p.age_years, 55.0);
    const OntologyTerm disease{"NCIT:C4872", "Breast Carcinoma", "diseases"};
    EXPECT_NE(std::find(p.structured_terms.begin(), p.structured_terms.end(), disease), p.structured_terms.end());
    const bool gene = std::any_of(p.structured_terms.begin(), p.structured_terms.end(),
                                  [](const OntologyTerm& t) { return t.id == "HGNC:1100" && t.label == "BRCA1"; });
    EXPECT_TRUE(gene);
    // narrative: labels and descriptions in document order, metaData skipped, repeats dropped
    EXPECT_EQ(p.narrative.rfind("Fever\n", 0), 0u);
    EXPECT_NE(p.narrative.find("Infiltrating Ductal Carcinoma"), std::string::npos);
    EXPECT_EQ(p.narrative.find("Human Phenotype Ontology"), std::string::npos);
    EXPECT_EQ(p.narrative.find("Breast Carcinoma"), p.narrative.rfind("Breast Carcinoma"));
    EXPECT_EQ(parse_phenopacket(fixture()), p);
}

TEST(Phenopacket, MinimalAndInvalid) {
    const auto p = parse_phenopacket(R"({"id":"x","subject":{"id":"p1"}})");
    EXPECT_EQ(p.narrative, "");
    EXPECT_TRUE(p.structured_terms.empty());
    EXPECT_EQ(p.sex, Sex::Unknown);
    EXPECT_FALSE(p.age_years);
    try {
        parse_phenopacket(R"({"id":"x","subject":{"sex":"MALE"}})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingSubjectId);
    }
    try {
        parse_phenopacket("{not json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MalformedJson);
    }
}

TEST(Phenopacket, AgeDurationsAndBirthFallback) {
    EXPECT_DOUBLE_EQ(*parse_iso8601_age("P55Y"), 55.0);
    EXPECT_DOUBLE_EQ(*parse_iso8601_age("P55Y6M"), 55.5);
    EXPECT_DOUBLE_EQ(*parse_iso8601_age("P52W"), 1.0);
    EXPECT_FALSE(parse_iso8601_age("55 years"));

    PhenopacketOptions opts;
    opts.reference_date = std::chrono::year{2024} / 3 / 1;
    const auto p = parse_phenopacket(R"({"subject":{"id":"p","dateOfBirth":"1970-06-01T00:00:00Z"}})", opts);
    ASSERT_TRUE(p.age_years);
    EXPECT_DOUBLE_EQ(*p.age_years, 53.0);
    EXPECT_FALSE(parse_phenopacket(R"({"subject":{"id":"p","dateOfBirth":"1970-06-01"}})").age_years);
}

TEST(Phenopacket, JsonRoundTrip) {
    auto p = parse_phenopacket(fixture());
    annotate_profile(p, dictionary());
    const nlohmann::json j = p;
    EXPECT_EQ(j.get<PatientProfile>(), p);
}

TEST(MockAugmenter, DiseaseEntitiesBecomeMainConditions) {
    PatientProfile p;
    p.patient_id = "p";
    p.narrative = "metastatic breast carcinoma. prior trastuzumab.";
    annotate_profile(p, dictionary());
    const auto out = MockAugmenter().augment(p);
    EXPECT_EQ(out.main_conditions, std::vector<std::string>{"breast carcinoma"});
    EXPECT_EQ(out.other_conditions, std::vector<std::string>{"trastuzumab"});
    const std::vector<std::string> sentences{"metastatic breast carcinoma.", "prior trastuzumab."};
    EXPECT_EQ(out.expanded_sentences, sentences);
}

TEST(MockAugmenter, FallsBackToFirstSentence) {
    PatientProfile p;
    p.patient_id = "p";
    p.narrative = "Unknown syndrome. More text.";
    const auto out = MockAugmenter().augment(p);
    EXPECT_EQ(out.main_conditions, std::vector<std::string>{"unknown syndrome."});
}

TEST(ExpandQuery, EmptyNarrativeGivesEmptyBundle) {
    PatientProfile p;
    p.patient_id = "p";
    CountingAugmenter aug;
    const auto b = expand_query(p, aug, MockEmbedder(32));
    EXPECT_TRUE(b.empty());
    EXPECT_TRUE(b.query_vectors.empty());
    EXPECT_EQ(aug.calls.load(), 0);
}

TEST(ExpandQuery, OneVectorPerSentencePlusNarrative) {
    auto p = parse_phenopacket(fixture());
    annotate_profile(p, dictionary());
    CountingAugmenter aug;
    const MockEmbedder emb(48);
    const auto b = expand_query(p, aug, emb);
    EXPECT_EQ(aug.calls.load(), 1);
    EXPECT_FALSE(b.main_conditions.empty());
    EXPECT_EQ(b.main_conditions.front(), "breast carcinoma");
    ASSERT_EQ(b.query_vectors.size(), b.expanded_sentences.size() + 1);
    for (const auto& v : b.query_vectors) EXPECT_EQ(v.size(), 48u);
    EXPECT_EQ(b.query_vectors.back(), emb.embed(p.narrative));
    EXPECT_NE(std::find(b.entity_terms.begin(), b.entity_terms.end(), "breast cancer"), b.entity_terms.end());
    const nlohmann::json j = b;
    EXPECT_EQ(j.get<QueryBundle>(), b);
}

TEST(LlmAugmenter, CopiesFieldsAndSendsPromptVerbatim) {
    const std::string reply = "Here you go:\n```json\n{\n \"main_conditions\": [\"Breast Carcinoma\", \"breast cancer\"],\n"
                              " \"other_conditions\": [\"BRCA1\"],\n \"expanded_sentences\": [\"Patient has breast cancer.\"]\n}\n```";
    auto client = std::make_shared<ScriptedClient>(std::vector<std::string>{reply});
    PatientProfile p;
    p.patient_id = "p";
    p.narrative = "Breast Carcinoma";
    const auto out = LlmAugmenter(client).augment(p);
    const std::vector<std::string> main{"Breast Carcinoma", "breast cancer"};
    EXPECT_EQ(out.main_conditions, main);
    EXPECT_EQ(out.other_conditions, std::vector<std::string>{"BRCA1"});
    EXPECT_EQ(out.expanded_sentences, std::vector<std::string>{"Patient has breast cancer."});
    ASSERT_EQ(client->requests.size(), 1u);
    ASSERT_EQ(client->requests[0].messages.size(), 2u);
    EXPECT_EQ(client->requests[0].messages[0].content, prompts::query_expansion());
    EXPECT_EQ(client->requests[0].messages[1].content, "Breast Carcinoma");
}

TEST(LlmAugmenter, RetriesMalformedOutputThenFails) {
    auto client = std::make_shared<ScriptedClient>(
        std::vector<std::string>{"no json here", R"({"main_conditions": "x"})", R"({"main_conditions": [],
        "other_conditions": [], "expanded_sentences": ["ok"]})"});
    PatientProfile p;
    p.patient_id = "p";
    p.narrative = "x";
    const auto out = LlmAugmenter(client, 2).augment(p);
    EXPECT_EQ(out.expanded_sentences, std::vector<std::string>{"ok"});
    EXPECT_EQ(client->requests.size(), 3u);

    auto bad = std::make_shared<ScriptedClient>(std::vector<std::string>{"nope"});
    try {
        LlmAugmenter(bad, 1).augment(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::AugmenterMalformedOutput);
    }
    EXPECT_EQ(bad->requests.size(), 2u);
}
