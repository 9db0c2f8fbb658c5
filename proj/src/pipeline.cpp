#include "trialmatch/pipeline.hpp"

#include <algorithm>
#include <unordered_set>

#include "trialmatch/error.hpp"
#include "trialmatch/parallel.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

namespace fs = std::filesystem;

void annotate_trial(Trial& trial, const ConceptDictionary* dictionary,
                    std::vector<NormalizationDiagnostic>* diagnostics) {
    if (trial.criteria.empty() && !trial.eligibility_text.empty()) segment_trial(trial);
    if (!dictionary) return;

    auto run = [&](std::string_view text, const std::string& source) {
        std::vector<NormalizationDiagnostic> local;
        auto mentions = annotate(text, *dictionary, diagnostics ? &local : nullptr);
        if (diagnostics) {
            for (auto& d : local) {
                d.source = source;
                diagnostics->push_back(std::move(d));
            }
        }
        return mentions;
    };
    trial.entities = run(trial.index_text(), trial.nct_id);
    enrich_with_synonyms(trial, *dictionary);
    for (auto& c : trial.criteria) {
        c.entities = run(c.text, c.criterion_id);
        enrich_with_synonyms(c, *dictionary);
    }
}

IngestResult ingest_directory(const fs::path& dir, const ConceptDictionary* dictionary) {
    if (!fs::is_directory(dir)) throw Error(Errc::Io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && text::to_lower_ascii(entry.path().extension().string()) == ".xml") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    IngestResult result;
    std::unordered_set<std::string> seen;
    for (const auto& file : files) {
        Trial trial;
        try {
            trial = parse_trial_xml(read_file(file));
        } catch (const Error& e) {
            nlohmann::ordered_json err;
            err["type"] = "file_error";
            err["file"] = fs::relative(file, dir).generic_string();
            err["error"] = to_string(e.code());
            err["message"] = e.what();
            result.file_errors.push_back(std::move(err));
            continue;
        }
        if (!seen.insert(trial.nct_id).second) {
            throw Error(Errc::DuplicateDocId, "nct_id " + trial.nct_id + " appears in more than one file");
        }
        annotate_trial(trial, dictionary, &result.normalization);
        result.trials.push_back(std::move(trial));
    }
    std::sort(result.trials.begin(), result.trials.end(),
              [](const Trial& a, const Trial& b) { return a.nct_id < b.nct_id; });
    return result;
}

std::string diagnostics_jsonl(const IngestResult& result) {
    std::string out;
    for (const auto& e : result.file_errors) out += e.dump() + "\n";
    for (const auto& d : result.normalization) {
        auto j = to_json(d);
        j["type"] = "normalization";
        out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    }
    return out;
}

namespace {

std::vector<std::string> enrichment_of(const std::vector<EntityMention>& entities,
                                       const std::vector<std::string>& synonyms) {
    std::vector<std::string> out;
    for (const auto& e : entities) out.push_back(e.surface);
    out.insert(out.end(), synonyms.begin(), synonyms.end());
    return out;
}

std::vector<Vector> embed_chunked(const Embedder& embedder, const std::vector<std::string>& texts) {
    constexpr std::size_t kChunk = 64;
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += kChunk) {
        const auto n = std::min(kChunk, texts.size() - i);
        auto part = embedder.embed_batch(std::span<const std::string>(texts.data() + i, n));
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

std::vector<LexicalDocument> trial_documents(const std::vector<Trial>& trials) {
    std::vector<LexicalDocument> docs;
    docs.reserve(trials.size());
    for (const auto& t : trials) docs.push_back({t.nct_id, t.index_text(), enrichment_of(t.entities, t.synonyms)});
    return docs;
}

std::vector<LexicalDocument> criterion_documents(const std::vector<Trial>& trials) {
    std::vector<LexicalDocument> docs;
    for (const auto& t : trials) {
        for (const auto& c : t.criteria) docs.push_back({c.criterion_id, c.text, enrichment_of(c.entities, c.synonyms)});
    }
    return docs;
}

IndexSet build_indices(const std::vector<Trial>& trials, const Embedder& embedder, const HnswParams& params) {
    IndexSet set;
    set.embedder_backend = embedder.backend();
    const auto tdocs = trial_documents(trials);
    const auto cdocs = criterion_documents(trials);
    set.trial_lexical = LexicalIndex::build(tdocs, IndexLevel::Trial);
    set.criterion_lexical = LexicalIndex::build(cdocs, IndexLevel::Criterion);

    set.trial_vectors = HnswIndex(embedder.dimension(), params);
    set.criterion_vectors = HnswIndex(embedder.dimension(), params);
    std::vector<std::string> texts;
    for (const auto& d : tdocs) texts.push_back(d.text);
    auto vectors = embed_chunked(embedder, texts);
    for (std::size_t i = 0; i < tdocs.size(); ++i) set.trial_vectors.insert(tdocs[i].id, vectors[i]);
    texts.clear();
    for (const auto& d : cdocs) texts.push_back(d.text);
    vectors = embed_chunked(embedder, texts);
    for (std::size_t i = 0; i < cdocs.size(); ++i) set.criterion_vectors.insert(cdocs[i].id, vectors[i]);
    set.trial_vectors.finalize();
    set.criterion_vectors.finalize();
    return set;
}

std::shared_ptr<const Embedder> make_embedder(const EngineConfig& config) {
    if (config.backends.mock_embed) {
        return std::make_shared<MockEmbedder>(config.embedding_dimension, 0x5eed, config.embed_max_tokens);
    }
    if (config.backends.embed_url.empty()) {
        throw Error(Errc::InvalidArgument, "no embedding backend: pass --mock-embed or set TRIALMATCH_EMBED_URL");
    }
    return std::make_shared<HttpEmbedder>(Endpoint::parse(config.backends.embed_url), config.embedding_dimension,
                                          config.backends.policy(), config.embed_max_tokens);
}

Backends make_backends(const EngineConfig& config, const ConceptDictionary* dictionary, MockRuleSet rules) {
    Backends b;
    b.embedder = make_embedder(config);
    const auto& be = config.backends;
    auto client_for = [&](const std::string& role_url) -> std::shared_ptr<const ChatClient> {
        const auto& url = role_url.empty() ? be.llm_url : role_url;
        if (url.empty()) {
            throw Error(Errc::InvalidArgument, "no LLM backend: pass --mock-llm or set TRIALMATCH_LLM_URL");
        }
        return std::make_shared<HttpChatClient>(Endpoint::parse(url));
    };
    if (be.mock_llm) {
        b.judge = std::make_shared<MockJudge>();
        b.reasoner = std::make_shared<MockReasoner>(dictionary, std::move(rules));
    } else {
        b.judge = std::make_shared<LlmJudge>(client_for(be.judge_url), config.judge_retries, be.policy());
        b.reasoner = std::make_shared<LlmReasoner>(client_for(be.reasoner_url), be.policy());
    }
    if (be.llm_augmenter && !be.mock_llm) {
        b.augmenter = std::make_shared<LlmAugmenter>(client_for(be.augmenter_url), config.augmenter_retries, be.policy());
    } else {
        b.augmenter = std::make_shared<MockAugmenter>();
    }
    return b;
}

TrialCatalog::TrialCatalog(std::vector<Trial> trials) : trials_(std::move(trials)) {
    for (std::size_t i = 0; i < trials_.size(); ++i) {
        if (!by_id_.emplace(trials_[i].nct_id, i).second) {
            throw Error(Errc::DuplicateDocId, "duplicate trial " + trials_[i].nct_id);
        }
        for (const auto& c : trials_[i].criteria) {
            if (!criteria_.emplace(c.criterion_id, &c).second) {
                throw Error(Errc::DuplicateDocId, "duplicate criterion " + c.criterion_id);
            }
        }
    }
}

const Trial* TrialCatalog::find(const std::string& nct_id) const {
    auto it = by_id_.find(nct_id);
    return it == by_id_.end() ? nullptr : &trials_[it->second];
}

MatchReport match_patient(PatientProfile profile, const TrialCatalog& catalog, const IndexSet& indices,
                          const Backends& backends, const EngineConfig& config,
                          const ConceptDictionary* dictionary) {
    config.validate();
    if (indices.trial_vectors.size() > 0 && indices.trial_vectors.dimension() != backends.embedder->dimension()) {
        throw Error(Errc::DimensionMismatch, "index dimension " + std::to_string(indices.trial_vectors.dimension()) +
                                                 " differs from embedder dimension " +
                                                 std::to_string(backends.embedder->dimension()));
    }
    if (!indices.embedder_backend.empty() && indices.embedder_backend != backends.embedder->backend()) {
        throw Error(Errc::InvalidArgument, "index was built with the " + indices.embedder_backend +
                                               " embedder, query uses " + backends.embedder->backend());
    }

    if (dictionary) annotate_profile(profile, *dictionary);

    MatchReport report;
    report.patient_id = profile.patient_id;
    report.bundle = expand_query(profile, *backends.augmenter, *backends.embedder);

    const auto allowed = prefilter(catalog.trials(), profile, config.retrieval);
    report.prefilter_survivors = allowed.size();
    report.candidates =
        hybrid_search(report.bundle, indices.trial_lexical, indices.trial_vectors, &allowed, config.retrieval);

    const PatientStatement statement{profile.narrative, profile_concepts(profile, dictionary)};
    auto reranked = rerank_candidates(statement, report.bundle, report.candidates, catalog.criteria(),
                                      indices.criterion_lexical, indices.criterion_vectors, *backends.judge,
                                      config.rerank_config());

    const std::size_t top = std::min(config.top_r, reranked.size());
    const auto assess_cfg = config.assess_config();
    auto assessments = parallel_map<EligibilityAssessment>(top, config.backends.parallelism, [&](std::size_t i) {
        const Trial* trial = catalog.find(reranked[i].trial_id);
        if (!trial) throw Error(Errc::UnknownDocId, "index references unknown trial " + reranked[i].trial_id);
        std::vector<std::string> context;
        for (const auto& j : reranked[i].judged) {
            if (j.relevance >= 0.5) context.push_back(catalog.criteria().at(j.criterion_id)->text);
        }
        return assess_eligibility(profile, report.bundle, *trial, *backends.reasoner, context, assess_cfg);
    });

    std::vector<RankedTrial> ranked;
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < reranked.size(); ++i) {
        RankedTrial r;
        r.trial_id = reranked[i].trial_id;
        r.rerank_score = reranked[i].rerank_score;
        r.assessed = i < top;
        if (r.assessed) r.s_composite = assessments[i].scores.s;
        ranked.push_back(r);
        position[r.trial_id] = i;
    }
    for (auto& r : final_rank(std::move(ranked))) {
        const auto i = position.at(r.trial_id);
        MatchedTrial m;
        m.ranked = r;
        m.fused_score = reranked[i].fused_score;
        m.aggregate = reranked[i].aggregate;
        if (i < top) m.assessment = std::move(assessments[i]);
        report.ranking.push_back(std::move(m));
    }
    return report;
}

nlohmann::ordered_json MatchReport::to_json() const {
    nlohmann::ordered_json j;
    j["patient_id"] = patient_id;
    nlohmann::ordered_json q;
    q["main_conditions"] = bundle.main_conditions;
    q["other_conditions"] = bundle.other_conditions;
    q["expanded_sentences"] = bundle.expanded_sentences;
    q["entity_terms"] = bundle.entity_terms;
    q["query_vectors"] = bundle.query_vectors.size();
    j["query"] = q;
    j["prefilter_survivors"] = prefilter_survivors;
    j["candidates"] = candidates.size();
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto& m = ranking[i];
        nlohmann::ordered_json row;
        row["rank"] = i + 1;
        row["trial_id"] = m.ranked.trial_id;
        row["assessed"] = m.ranked.assessed;
        row["s_composite"] = m.ranked.s_composite;
        row["rerank_score"] = m.ranked.rerank_score;
        row["fused_score"] = m.fused_score;
        row["criterion_aggregate"] = m.aggregate;
        if (m.assessment) {
            auto a = trialmatch::to_json(*m.assessment);
            row["s_inc"] = a["s_inc"];
            row["s_exc"] = a["s_exc"];
            row["final_decision"] = a["final_decision"];
            row["recap"] = a["recap"];
            row["degraded"] = a["degraded"];
            row["verdicts"] = a["verdicts"];
            row["diagnostics"] = a["diagnostics"];
        }
        list.push_back(std::move(row));
    }
    j["ranking"] = list;
    return j;
}

std::string MatchReport::run_lines(std::string_view tag) const {
    RunsByPatient runs;
    std::map<std::string, std::vector<double>> scores;
    auto& r = runs[patient_id];
    auto& s = scores[patient_id];
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        r.push_back(ranking[i].ranked.trial_id);
        s.push_back(static_cast<double>(ranking.size() - i));
    }
    return write_run(runs, scores, tag);
}

}  // namespace trialmatch
