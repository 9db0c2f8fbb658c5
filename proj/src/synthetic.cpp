#include "trialmatch/synthetic.hpp"

#include <array>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "trialmatch/corpus.hpp"
#include "trialmatch/index_store.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch::synthetic {
namespace {

struct Term {
    const char* id;
    const char* label;
    std::vector<const char*> synonyms;
};

const std::array<Term, 20>& diseases() {
    static const std::array<Term, 20> d{{
        {"NCIT:C4872", "breast carcinoma", {"breast cancer", "mammary carcinoma"}},
        {"SYN:D001", "renal cell carcinoma", {"kidney cancer"}},
        {"SYN:D002", "hepatocellular carcinoma", {"liver cell carcinoma"}},
        {"SYN:D003", "glioblastoma", {"glioblastoma multiforme"}},
        {"SYN:D004", "pancreatic adenocarcinoma", {"pancreatic cancer"}},
        {"SYN:D005", "melanoma", {"malignant melanoma"}},
        {"SYN:D006", "colorectal adenocarcinoma", {"colorectal cancer"}},
        {"SYN:D007", "gastric adenocarcinoma", {"stomach cancer"}},
        {"SYN:D008", "ovarian carcinoma", {"ovarian cancer"}},
        {"SYN:D009", "prostate adenocarcinoma", {"prostate cancer"}},
        {"SYN:D010", "bladder urothelial carcinoma", {"bladder cancer"}},
        {"SYN:D011", "cervical squamous cell carcinoma", {"cervical cancer"}},
        {"SYN:D012", "endometrial carcinoma", {"uterine cancer"}},
        {"SYN:D013", "thyroid carcinoma", {"thyroid cancer"}},
        {"SYN:D014", "mesothelioma", {"pleural mesothelioma"}},
        {"SYN:D015", "osteosarcoma", {"osteogenic sarcoma"}},
        {"SYN:D016", "neuroblastoma", {}},
        {"SYN:D017", "multiple myeloma", {"plasma cell myeloma"}},
        {"SYN:D018", "lung adenocarcinoma", {"adenocarcinoma of the lung"}},
        {"SYN:D019", "esophageal carcinoma", {"esophageal cancer"}},
    }};
    return d;
}

const std::array<Term, 10>& genes() {
    static const std::array<Term, 10> g{{
        {"HGNC:1100", "BRCA1", {}},
        {"SYN:G001", "BRCA2", {}},
        {"SYN:G002", "ALK", {"anaplastic lymphoma kinase"}},
        {"SYN:G003", "ROS1", {}},
        {"SYN:G004", "EGFR", {"epidermal growth factor receptor"}},
        {"SYN:G005", "KRAS", {}},
        {"SYN:G006", "BRAF", {}},
        {"SYN:G007", "PIK3CA", {}},
        {"SYN:G008", "IDH1", {}},
        {"SYN:G009", "NTRK1", {}},
    }};
    return g;
}

const std::array<Term, 10>& drugs() {
    static const std::array<Term, 10> p{{
        {"NCIT:C1647", "trastuzumab", {"herceptin"}},
        {"NCIT:C405", "doxorubicin", {"adriamycin"}},
        {"SYN:P002", "cisplatin", {}},
        {"SYN:P003", "paclitaxel", {"taxol"}},
        {"SYN:P004", "carboplatin", {}},
        {"SYN:P005", "gemcitabine", {}},
        {"SYN:P006", "pembrolizumab", {"keytruda"}},
        {"SYN:P007", "nivolumab", {"opdivo"}},
        {"SYN:P008", "olaparib", {"lynparza"}},
        {"SYN:P009", "bevacizumab", {"avastin"}},
    }};
    return p;
}

std::size_t disease_of(std::size_t trial) { return trial % 20; }
std::size_t gene_of(std::size_t trial) { return (trial / 20) % 10; }

bool female_only(std::size_t d) { return d == 0 || d == 8 || d == 11 || d == 12; }

std::string patient_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synthetic-patient-%02zu", i);
    return buf;
}

std::string patient_sex(std::size_t i) {
    const auto d = i % 20;
    if (female_only(d)) return "FEMALE";
    if (d == 9) return "MALE";
    return i % 2 == 0 ? "FEMALE" : "MALE";
}

double patient_age(std::size_t i) { return i == 0 ? 55.0 : 30.0 + 2.0 * static_cast<double>(i); }

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& items, std::string_view last_sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += (i + 1 == items.size()) ? std::string(last_sep) : std::string(", ");
        out += items[i];
    }
    return out;
}

struct Eligibility {
    std::string status = "Recruiting";
    std::string gender = "All";
    std::string min_age = "18 Years";
    std::string max_age = "75 Years";
};

Eligibility eligibility_for(std::size_t t, const std::vector<long>& designated_for) {
    Eligibility e;
    if (designated_for[t] >= 0) {
        const auto i = static_cast<std::size_t>(designated_for[t]);
        if (i % 3 == 0) e.gender = patient_sex(i) == "FEMALE" ? "Female" : "Male";
        return e;
    }
    switch (t % 9) {
        case 4: e.status = "Completed"; break;
        case 7: e.status = "Withdrawn"; break;
        case 2: e.status = "Active, not recruiting"; break;
        default: break;
    }
    switch (t % 6) {
        case 1: e.gender = "Male"; break;
        case 2: e.gender = "Female"; break;
        default: break;
    }
    switch (t % 4) {
        case 1: e.max_age = "N/A"; break;
        case 2: e.min_age = "40 Years"; e.max_age = "65 Years"; break;
        case 3: e.min_age = "12 Years"; e.max_age = "17 Years"; break;
        default: break;
    }
    if (female_only(disease_of(t))) e.gender = "Female";
    return e;
}

std::string trial_document(std::size_t t, const Eligibility& e) {
    const auto& d = diseases()[disease_of(t)];
    const auto& g = genes()[gene_of(t)];
    const auto& p = drugs()[gene_of(t)];

    std::vector<std::string> other_genes;
    for (std::size_t k = 0; k < genes().size(); ++k) {
        if (k != gene_of(t)) other_genes.emplace_back(genes()[k].label);
    }
    std::vector<std::string> other_diseases;
    for (std::size_t k = 0; k < diseases().size(); ++k) {
        if (k != disease_of(t)) other_diseases.emplace_back(diseases()[k].label);
    }

    const std::string age_line = e.max_age == "N/A"
                                     ? "Age " + e.min_age.substr(0, e.min_age.find(' ')) + " years or older."
                                     : "Age between " + e.min_age.substr(0, e.min_age.find(' ')) + " and " +
                                           e.max_age.substr(0, e.max_age.find(' ')) + " years.";

    std::string criteria;
    criteria += "Inclusion Criteria:\n\n";
    criteria += "  1. Histologically confirmed " + std::string(d.label) + ".\n";
    criteria += "  2. Documented " + std::string(g.label) + " mutation in tumor tissue.\n";
    criteria += "  3. Prior treatment with " + std::string(p.label) + ".\n";
    criteria += "  4. " + age_line + "\n";
    criteria += "  5. ECOG performance status 0 to 1.\n";
    criteria += "  6. Adequate organ function:\n";
    criteria += "       a. Absolute neutrophil count of at least 1500 per cubic millimeter.\n";
    criteria += "       b. Total bilirubin within normal limits.\n\n";
    criteria += "Exclusion Criteria:\n\n";
    criteria += "  1. Known " + join(other_genes, " or ") + " mutation.\n";
    criteria += "  2. History of another malignancy, including " + join(other_diseases, " or ") + ".\n";
    criteria += "  3. Pregnant or breastfeeding women.\n";
    criteria += "  4. Active uncontrolled infection.\n";

    const std::string id = nct_id(t);
    std::string x;
    x += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<clinical_study>\n";
    x += "  <id_info><nct_id>" + id + "</nct_id></id_info>\n";
    x += "  <brief_title>" + std::string(p.label) + " in " + g.label + "-mutated " + d.label + "</brief_title>\n";
    x += "  <official_title>A Phase II Study of " + std::string(p.label) + " in Patients With " + g.label +
         "-Mutated " + d.label + "</official_title>\n";
    x += "  <brief_summary><textblock>This study evaluates " + std::string(p.label) + " in patients with " +
         d.label + " whose tumors carry a " + g.label + " mutation.</textblock></brief_summary>\n";
    x += "  <overall_status>" + xml_escape(e.status) + "</overall_status>\n";
    x += "  <start_date>January 2020</start_date>\n";
    x += "  <completion_date>December 2025</completion_date>\n";
    x += "  <condition>" + std::string(d.label) + "</condition>\n";
    x += "  <eligibility>\n    <criteria><textblock>\n" + xml_escape(criteria) + "    </textblock></criteria>\n";
    x += "    <gender>" + e.gender + "</gender>\n";
    x += "    <minimum_age>" + e.min_age + "</minimum_age>\n";
    x += "    <maximum_age>" + e.max_age + "</maximum_age>\n";
    x += "  </eligibility>\n";
    x += "  <location><facility><address><city>Springfield</city><country>United States</country></address>"
         "</facility></location>\n";
    x += "</clinical_study>\n";
    return x;
}

std::string patient_document(std::size_t i) {
    if (i == 0) return std::string(example_phenopacket());
    const auto& d = diseases()[i % 20];
    const auto& g = genes()[i % 10];
    const auto& p = drugs()[i % 10];
    nlohmann::ordered_json j;
    j["id"] = "synthetic-packet-" + std::to_string(i);
    j["subject"] = {{"id", patient_id(i)},
                    {"sex", patient_sex(i)},
                    {"ageAtDiagnosis", {{"age", "P" + std::to_string(static_cast<int>(patient_age(i))) + "Y"}}}};
    j["diseases"] = nlohmann::ordered_json::array({{{"term", {{"id", d.id}, {"label", d.label}}}}});
    j["treatments"] = nlohmann::ordered_json::array({{{"agent", {{"id", p.id}, {"label", p.label}}}}});
    j["interpretations"] = nlohmann::ordered_json::array(
        {{{"id", "interpretation-" + std::to_string(i)},
          {"diagnosis",
           {{"disease", {{"id", d.id}, {"label", d.label}}},
            {"genomicInterpretations",
             nlohmann::ordered_json::array(
                 {{{"status", "POSITIVE"}, {"gene", {{"id", g.id}, {"symbol", g.label}}}}})}}}}});
    j["description"] = "Patient diagnosed with " + std::string(d.label) + ". Tumor testing shows " + g.label +
                       " mutation. Previously treated with " + p.label + ".";
    j["metaData"] = {{"created", "2024-03-24T00:00:00Z"}, {"phenopacketSchemaVersion", "2.0"}};
    return j.dump(2) + "\n";
}

MockRule rule_for(const Criterion& c, std::size_t t) {
    MockRule r;
    const auto text = c.text;  // already cleaned and lowercased
    if (c.kind == CriterionKind::Inclusion) {
        if (text.starts_with("histologically confirmed")) r.requires_concepts.insert(diseases()[disease_of(t)].id);
        else if (text.starts_with("documented")) r.requires_concepts.insert(genes()[gene_of(t)].id);
        else if (text.starts_with("prior treatment with")) r.requires_concepts.insert(drugs()[gene_of(t)].id);
    } else {
        if (text.starts_with("known")) {
            for (std::size_t k = 0; k < genes().size(); ++k) {
                if (k != gene_of(t)) r.forbids_concepts.insert(genes()[k].id);
            }
        } else if (text.starts_with("history of another malignancy")) {
            for (std::size_t k = 0; k < diseases().size(); ++k) {
                if (k != disease_of(t)) r.forbids_concepts.insert(diseases()[k].id);
            }
        }
    }
    return r;
}

}  // namespace

std::size_t designated_trial(std::size_t patient) { return patient + 20 * (patient % 10); }

std::string nct_id(std::size_t trial) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "NCT%08zu", static_cast<std::size_t>(90000000) + trial);
    return buf;
}

std::string_view example_phenopacket() {
    static constexpr std::string_view doc = R"json({
  "id": "cancer-patient-example-001",
  "subject": {
    "id": "patient-001",
    "sex": "FEMALE",
    "ageAtDiagnosis": {
      "age": "P55Y"
    }
  },
  "phenotypicFeatures": [
    {"type": {"id": "HP:0001945", "label": "Fever"}},
    {"type": {"id": "HP:0002014", "label": "Weight loss"}},
    {"type": {"id": "HP:0002099", "label": "Asthenia"}},
    {"type": {"id": "HP:0002719", "label": "Anemia"}},
    {"type": {"id": "HP:0012378", "label": "Fatigue"}}
  ],
  "diseases": [
    {
      "term": {"id": "NCIT:C4872", "label": "Breast Carcinoma"},
      "clinicalTnmFinding": [
        {"value": "T2N1M0", "description": "Tumor size approximately 3 cm with regional lymph node involvement, no distant metastasis"}
      ],
      "primarySite": {"id": "UBERON:0000310", "label": "Breast"},
      "stage": {"id": "NCIT:C27971", "label": "Stage IIB"}
    }
  ],
  "biosamples": [
    {
      "id": "biosample-tumor-001",
      "sampledTissue": {"id": "UBERON:0000310", "label": "Breast"},
      "tumorProgression": {"id": "NCIT:C84509", "label": "Primary malignant neoplasm"},
      "histologicalDiagnosis": {"id": "NCIT:C4194", "label": "Infiltrating Ductal Carcinoma"},
      "procedure": {"code": {"id": "NCIT:C5189", "label": "Biopsy"}},
      "description": "Tumor biopsy from left breast showing infiltrating ductal carcinoma, moderate differentiation, ER-positive, PR-negative, HER2-positive"
    }
  ],
  "treatments": [
    {"agent": {"id": "NCIT:C405", "label": "Doxorubicin"}, "routeOfAdministration": {"id": "NCIT:C38288", "label": "Intravenous Route"}},
    {"agent": {"id": "NCIT:C1647", "label": "Trastuzumab"}, "routeOfAdministration": {"id": "NCIT:C38288", "label": "Intravenous Route"}}
  ],
  "interpretations": [
    {
      "id": "interpretation-001",
      "diagnosis": {
        "disease": {"id": "NCIT:C4872", "label": "Breast Carcinoma"},
        "genomicInterpretations": [
          {
            "status": "POSITIVE",
            "gene": {"id": "HGNC:1100", "symbol": "BRCA1"},
            "variantInterpretation": {
              "variationDescriptor": {"id": "ClinVar:17661", "label": "BRCA1 c.68_69delAG (p.Glu23Valfs)"},
              "therapeuticActionability": "Potential sensitivity to PARP inhibitors"
            }
          }
        ]
      }
    }
  ],
  "description": "Patient diagnosed with BRCA1-positive infiltrating ductal carcinoma, ER-positive, HER2-positive; recommended genetic counseling, targeted therapy with trastuzumab, and consideration for PARP inhibitors.",
  "metaData": {
    "created": "2024-03-24T00:00:00Z",
    "createdBy": "Your Institution Name",
    "phenopacketSchemaVersion": "2.0",
    "resources": [
      {"id": "hp", "name": "Human Phenotype Ontology", "url": "http://purl.obolibrary.org/obo/hp.owl", "version": "2024-03-01"},
      {"id": "ncit", "name": "NCI Thesaurus", "url": "https://ncit.nci.nih.gov/ncitbrowser/", "version": "23.02d"},
      {"id": "uberon", "name": "Uber-anatomy ontology", "url": "http://purl.obolibrary.org/obo/uberon.owl", "version": "2024-01-15"},
      {"id": "hgnc", "name": "HUGO Gene Nomenclature Committee", "url": "https://www.genenames.org", "version": "2024-03-01"},
      {"id": "clinvar", "name": "ClinVar", "url": "https://www.ncbi.nlm.nih.gov/clinvar/", "version": "2024-03-01"}
    ]
  }
}
)json";
    return doc;
}

Corpus make_corpus() {
    Corpus c;

    auto add_terms = [&](const auto& terms, const char* cls) {
        for (const auto& t : terms) {
            nlohmann::ordered_json j;
            j["id"] = t.id;
            j["label"] = t.label;
            j["class"] = cls;
            j["synonyms"] = nlohmann::ordered_json::array();
            for (const char* s : t.synonyms) j["synonyms"].push_back(s);
            c.dictionary_ndjson += j.dump() + "\n";
        }
    };
    add_terms(diseases(), "disease");
    add_terms(genes(), "gene");
    add_terms(drugs(), "drug");

    std::vector<long> designated_for(kTrialCount, -1);
    for (std::size_t i = 0; i < kPatientCount; ++i) designated_for[designated_trial(i)] = static_cast<long>(i);

    for (std::size_t t = 0; t < kTrialCount; ++t) {
        auto doc = trial_document(t, eligibility_for(t, designated_for));
        Trial trial = parse_trial_xml(doc);
        segment_trial(trial);
        for (const auto& cr : trial.criteria) {
            auto r = rule_for(cr, t);
            if (!r.requires_concepts.empty() || !r.forbids_concepts.empty()) c.rules.rules.emplace(cr.criterion_id, r);
        }
        c.trial_xml.emplace_back(nct_id(t), std::move(doc));
    }

    for (std::size_t i = 0; i < kPatientCount; ++i) {
        const std::string pid = i == 0 ? "patient-001" : patient_id(i);
        c.patients.emplace_back(pid, patient_document(i));
        const auto target = designated_trial(i);
        c.designated.push_back(nct_id(target));
        for (std::size_t t = 0; t < kTrialCount; ++t) {
            if (t == target) c.qrels += pid + " 0 " + nct_id(t) + " 2\n";
            else if (disease_of(t) == disease_of(target)) c.qrels += pid + " 0 " + nct_id(t) + " 1\n";
        }
    }
    return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "xml");
    std::filesystem::create_directories(dir / "patients");
    for (const auto& [id, doc] : corpus.trial_xml) write_file_atomic(dir / "xml" / (id + ".xml"), doc);
    for (const auto& [id, doc] : corpus.patients) write_file_atomic(dir / "patients" / (id + ".json"), doc);
    write_file_atomic(dir / "dictionary.jsonl", corpus.dictionary_ndjson);
    write_file_atomic(dir / "qrels.txt", corpus.qrels);
    write_file_atomic(dir / "mock_rules.json", corpus.rules.to_json() + "\n");
    std::string tsv = "patient_id\ttrial_id\n";
    for (std::size_t i = 0; i < corpus.patients.size(); ++i) {
        tsv += corpus.patients[i].first + "\t" + corpus.designated[i] + "\n";
    }
    write_file_atomic(dir / "designated.tsv", tsv);
}

}  // namespace trialmatch::synthetic
