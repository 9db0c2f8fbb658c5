// trialmatch: ingest, index, match and eval subcommands over the interchange files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trialmatch/config.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/eval.hpp"
#include "trialmatch/index_store.hpp"
#include "trialmatch/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trialmatch;

namespace {

struct GlobalFlags {
    std::string config_path;
    bool mock_llm = false;
    bool mock_embed = false;
    std::optional<std::size_t> k;
    std::string strategy;
    std::optional<std::size_t> top_r;
    std::string llm_url;
    std::string embed_url;
    std::string dictionary;
    std::string rules;
};

EngineConfig resolve_config(const GlobalFlags& f) {
    EngineConfig c;
    if (!f.config_path.empty()) c = load_config(read_file(f.config_path));
    if (f.mock_llm) c.backends.mock_llm = true;
    if (f.mock_embed) c.backends.mock_embed = true;
    if (f.k) {
        c.retrieval.k_candidates = *f.k;
        c.retrieval.k_arm = std::max(c.retrieval.k_arm, *f.k);
    }
    if (!f.strategy.empty()) c.strategy = parse_aggregation_strategy(f.strategy);
    if (f.top_r) c.top_r = *f.top_r;
    if (!f.llm_url.empty()) c.backends.llm_url = f.llm_url;
    if (!f.embed_url.empty()) c.backends.embed_url = f.embed_url;
    if (!f.dictionary.empty()) c.paths.dictionary = f.dictionary;
    if (!f.rules.empty()) c.paths.mock_rules = f.rules;
    apply_environment(c);
    c.validate();
    return c;
}

std::optional<ConceptDictionary> load_dictionary(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return ConceptDictionary::from_ndjson(read_file(path));
}

void emit_error(std::string_view code, std::string_view message) {
    nlohmann::ordered_json j;
    j["error"] = code;
    j["message"] = message;
    std::cerr << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
}

void emit_warning(std::string_view code, std::string_view message) {
    nlohmann::ordered_json j;
    j["warning"] = code;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
}

int cmd_ingest(const GlobalFlags& g, const std::string& input, const std::string& out) {
    const auto config = resolve_config(g);
    const auto dict = load_dictionary(config.paths.dictionary);
    const auto result = ingest_directory(input, dict ? &*dict : nullptr);
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_file_atomic(out_path, write_trials_jsonl(result.trials));
    auto diag = out_path;
    diag.replace_extension(".diagnostics.jsonl");
    write_file_atomic(diag, diagnostics_jsonl(result));
    if (result.trials.empty()) emit_warning("EmptyCorpus", "no trials parsed from " + input);
    for (const auto& e : result.file_errors) std::cerr << e.dump() << "\n";
    return 0;
}

int cmd_index(const GlobalFlags& g, const std::string& trials_path, const std::string& out) {
    const auto config = resolve_config(g);
    auto trials = read_trials_jsonl(read_file(trials_path));
    const auto dict = load_dictionary(config.paths.dictionary);
    // Trials ingested without a dictionary get annotated here when one is given.
    if (dict) {
        for (auto& t : trials) {
            if (t.criteria.empty() || t.entities.empty()) annotate_trial(t, &*dict);
        }
    } else {
        for (auto& t : trials) annotate_trial(t, nullptr);
    }
    if (trials.empty()) emit_warning("EmptyCorpus", "building empty indices from " + trials_path);
    const auto embedder = make_embedder(config);
    const auto set = build_indices(trials, *embedder, config.hnsw);
    const fs::path dir(out);
    save_index_set(set, dir);
    write_file_atomic(dir / "trials.jsonl", write_trials_jsonl(trials));
    if (dict) write_file_atomic(dir / "dictionary.jsonl", read_file(config.paths.dictionary));
    if (!config.paths.mock_rules.empty()) write_file_atomic(dir / "mock_rules.json", read_file(config.paths.mock_rules));
    return 0;
}

int cmd_match(const GlobalFlags& g, const std::string& patient_path, const std::string& index_dir,
              const std::string& out, const std::string& run_out, const std::string& candidates_out) {
    auto config = resolve_config(g);
    const fs::path dir(index_dir);
    if (config.paths.dictionary.empty() && fs::exists(dir / "dictionary.jsonl")) {
        config.paths.dictionary = (dir / "dictionary.jsonl").string();
    }
    if (config.paths.mock_rules.empty() && fs::exists(dir / "mock_rules.json")) {
        config.paths.mock_rules = (dir / "mock_rules.json").string();
    }
    const auto dict = load_dictionary(config.paths.dictionary);
    const auto rules =
        config.paths.mock_rules.empty() ? MockRuleSet{} : MockRuleSet::from_json(read_file(config.paths.mock_rules));

    PhenopacketOptions popts;
    popts.reference_date = config.reference_date;
    auto profile = parse_phenopacket(read_file(patient_path), popts);

    const auto indices = load_index_set(dir);
    const TrialCatalog catalog(read_trials_jsonl(read_file(dir / "trials.jsonl")));
    const auto backends = make_backends(config, dict ? &*dict : nullptr, rules);
    const auto report = match_patient(std::move(profile), catalog, indices, backends, config, dict ? &*dict : nullptr);

    write_file_atomic(out, report.to_json().dump(2) + "\n");
    if (!run_out.empty()) write_file_atomic(run_out, report.run_lines("trialmatch"));
    if (!candidates_out.empty()) write_file_atomic(candidates_out, candidates_jsonl(report.patient_id, report.candidates));
    return 0;
}

int cmd_eval(const GlobalFlags& g, const std::string& run_path, const std::string& qrels_path,
             const std::string& out) {
    const auto config = resolve_config(g);
    const auto runs = load_run(read_file(run_path));
    const auto qrels = load_qrels(read_file(qrels_path));
    EvalOptions options;
    options.precision_mode = config.precision_mode;
    const auto report = evaluate(runs, qrels, options);
    const fs::path dir(out);
    fs::create_directories(dir);
    write_file_atomic(dir / "report.json", report.to_json().dump(2) + "\n");
    write_file_atomic(dir / "per_patient.csv", report.per_patient_csv());
    write_file_atomic(dir / "recall_curve.tsv", report.recall_curve_tsv());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clinical trial matching engine"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    std::size_t k = 0;
    std::size_t top_r = 0;
    app.add_option("--config", g.config_path, "Engine config JSON")->check(CLI::ExistingFile);
    app.add_flag("--mock-llm", g.mock_llm, "Use the deterministic judge, reasoner and augmenter");
    app.add_flag("--mock-embed", g.mock_embed, "Use the hashing embedder");
    auto* k_opt = app.add_option("--k", k, "Trial candidates kept after fusion")->check(CLI::PositiveNumber);
    app.add_option("--strategy", g.strategy, "MAX, MEAN, SQRT_NORM, LOG_NORM or WEIGHTED");
    auto* r_opt = app.add_option("--top-r", top_r, "Trials sent to eligibility reasoning");
    app.add_option("--llm-url", g.llm_url, "Chat completion endpoint");
    app.add_option("--embed-url", g.embed_url, "Embedding endpoint");
    app.add_option("--dictionary", g.dictionary, "Concept dictionary (JSON lines)");
    app.add_option("--rules", g.rules, "Mock reasoner rule set");

    std::string input, out, trials, patient, index_dir, run_out, candidates_out, run_in, qrels;

    auto* ingest = app.add_subcommand("ingest", "Registry XML directory to canonical trials JSONL");
    ingest->add_option("--input", input, "Directory of trial XML files")->required()->check(CLI::ExistingDirectory);
    ingest->add_option("--out", out, "Output trials.jsonl")->required();

    auto* index = app.add_subcommand("index", "Build lexical and vector indices");
    index->add_option("--trials", trials, "trials.jsonl from ingest")->required()->check(CLI::ExistingFile);
    index->add_option("--out", out, "Index directory")->required();

    auto* match = app.add_subcommand("match", "Rank trials for one phenopacket");
    match->add_option("--patient", patient, "Phenopacket JSON")->required()->check(CLI::ExistingFile);
    match->add_option("--index", index_dir, "Index directory")->required()->check(CLI::ExistingDirectory);
    match->add_option("--out", out, "Match report JSON")->required();
    match->add_option("--run", run_out, "Also write a TREC run file");
    match->add_option("--candidates", candidates_out, "Also write first-stage candidates JSONL");

    auto* eval = app.add_subcommand("eval", "Score a TREC run against qrels");
    eval->add_option("--run", run_in, "Run file")->required()->check(CLI::ExistingFile);
    eval->add_option("--qrels", qrels, "Qrels file")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", out, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        emit_error("InvalidArgument", e.what());
        return 2;
    }
    if (k_opt->count() > 0) g.k = k;
    if (r_opt->count() > 0) g.top_r = top_r;

    try {
        if (ingest->parsed()) return cmd_ingest(g, input, out);
        if (index->parsed()) return cmd_index(g, trials, out);
        if (match->parsed()) return cmd_match(g, patient, index_dir, out, run_out, candidates_out);
        if (eval->parsed()) return cmd_eval(g, run_in, qrels, out);
    } catch (const Error& e) {
        emit_error(to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("Internal", e.what());
        return 1;
    }
    return 1;
}
