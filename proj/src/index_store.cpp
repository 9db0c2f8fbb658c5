#include "trialmatch/index_store.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"

namespace trialmatch {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTrialLexical = "trial_lexical.seg";
constexpr const char* kCriterionLexical = "criterion_lexical.seg";
constexpr const char* kTrialVectors = "trial_vectors.seg";
constexpr const char* kCriterionVectors = "criterion_vectors.seg";

nlohmann::json lexical_entry(const LexicalIndex& index, const char* file) {
    return {{"file", file},
            {"level", to_string(index.level())},
            {"doc_count", index.doc_count()},
            {"k1", index.params().k1},
            {"b", index.params().b}};
}

nlohmann::json vector_entry(const HnswIndex& index, const char* file) {
    return {{"file", file},
            {"size", index.size()},
            {"dimension", index.dimension()},
            {"M", index.params().M},
            {"ef_construction", index.params().ef_construction},
            {"ef_search", index.params().ef_search},
            {"seed", index.params().seed}};
}

template <typename Index>
std::string serialize(const Index& index) {
    std::ostringstream out(std::ios::binary);
    index.save(out);
    return std::move(out).str();
}

template <typename Index>
Index deserialize(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IndexFormat, "missing index segment " + path.string());
    return Index::load(in);
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::Io, "cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(Errc::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(Errc::Io, "rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void save_index_set(const IndexSet& set, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());

    write_file_atomic(dir / kTrialLexical, serialize(set.trial_lexical));
    write_file_atomic(dir / kCriterionLexical, serialize(set.criterion_lexical));
    write_file_atomic(dir / kTrialVectors, serialize(set.trial_vectors));
    write_file_atomic(dir / kCriterionVectors, serialize(set.criterion_vectors));

    nlohmann::ordered_json manifest;
    manifest["format_version"] = kIndexFormatVersion;
    manifest["embedder_backend"] = set.embedder_backend;
    manifest["dimension"] = set.trial_vectors.dimension();
    manifest["trial_lexical"] = lexical_entry(set.trial_lexical, kTrialLexical);
    manifest["criterion_lexical"] = lexical_entry(set.criterion_lexical, kCriterionLexical);
    manifest["trial_vectors"] = vector_entry(set.trial_vectors, kTrialVectors);
    manifest["criterion_vectors"] = vector_entry(set.criterion_vectors, kCriterionVectors);
    // manifest last: a directory without one is an incomplete build
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

IndexSet load_index_set(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw Error(Errc::IndexFormat, "no manifest.json in " + dir.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::IndexFormat, std::string("unreadable manifest: ") + e.what());
    }
    const int version = manifest.value("format_version", 0);
    if (version < 1 || version > kIndexFormatVersion) {
        throw Error(Errc::IndexFormat, "unsupported index format version " + std::to_string(version));
    }

    IndexSet set;
    set.embedder_backend = manifest.value("embedder_backend", "");
    set.trial_lexical = deserialize<LexicalIndex>(dir / kTrialLexical);
    set.criterion_lexical = deserialize<LexicalIndex>(dir / kCriterionLexical);
    set.trial_vectors = deserialize<HnswIndex>(dir / kTrialVectors);
    set.criterion_vectors = deserialize<HnswIndex>(dir / kCriterionVectors);

    const auto dim = manifest.value("dimension", std::size_t{0});
    if (set.trial_vectors.dimension() != dim || set.criterion_vectors.dimension() != dim) {
        throw Error(Errc::IndexFormat, "segment dimension disagrees with manifest");
    }
    if (set.trial_lexical.doc_count() != manifest["trial_lexical"].value("doc_count", std::size_t{0}) ||
        set.criterion_lexical.doc_count() != manifest["criterion_lexical"].value("doc_count", std::size_t{0})) {
        throw Error(Errc::IndexFormat, "segment document count disagrees with manifest");
    }
    return set;
}

}  // namespace trialmatch
