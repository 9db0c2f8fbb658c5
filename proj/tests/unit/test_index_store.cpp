#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "trialmatch/embed.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/index_store.hpp"
#include "trialmatch/pipeline.hpp"
#include "trialmatch/synthetic.hpp"

using namespace trialmatch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("trialmatch_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<Trial> small_corpus() {
    const auto corpus = synthetic::make_corpus();
    const auto dict = ConceptDictionary::from_ndjson(corpus.dictionary_ndjson);
    std::vector<Trial> trials;
    for (std::size_t i = 0; i < 12; ++i) {
        auto t = parse_trial_xml(corpus.trial_xml[i].second);
        annotate_trial(t, &dict);
        trials.push_back(std::move(t));
    }
    return trials;
}

}  // namespace

TEST(IndexStore, RoundTripPreservesSearchResults) {
    const auto trials = small_corpus();
    const MockEmbedder emb(32);
    const auto set = build_indices(trials, emb, HnswParams{});
    const auto dir = temp_dir("roundtrip");
    save_index_set(set, dir);
    for (const char* f : {"manifest.json", "trial_lexical.seg", "criterion_lexical.seg", "trial_vectors.seg",
                          "criterion_vectors.seg"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto back = load_index_set(dir);
    EXPECT_EQ(back.embedder_backend, "mock");
    EXPECT_EQ(back.trial_lexical.doc_ids(), set.trial_lexical.doc_ids());
    EXPECT_EQ(back.criterion_vectors.size(), set.criterion_vectors.size());
    const std::vector<std::string> q{"brca1", "carcinoma"};
    EXPECT_EQ(back.trial_lexical.topk(q, 5), set.trial_lexical.topk(q, 5));
    EXPECT_EQ(back.criterion_lexical.topk(q, 5), set.criterion_lexical.topk(q, 5));
    const auto v = emb.embed("breast carcinoma brca1");
    EXPECT_EQ(back.trial_vectors.search(v, 5), set.trial_vectors.search(v, 5));

    // Saving again over the same directory gives identical bytes.
    const auto dir2 = temp_dir("roundtrip2");
    save_index_set(back, dir2);
    for (const char* f : {"manifest.json", "trial_lexical.seg", "criterion_vectors.seg"}) {
        EXPECT_EQ(read_file(dir / f), read_file(dir2 / f)) << f;
    }
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST(IndexStore, EmptyCorpusRoundTrips) {
    const auto set = build_indices({}, MockEmbedder(16), HnswParams{});
    const auto dir = temp_dir("empty");
    save_index_set(set, dir);
    const auto back = load_index_set(dir);
    EXPECT_EQ(back.trial_lexical.doc_count(), 0u);
    EXPECT_EQ(back.trial_vectors.size(), 0u);
    fs::remove_all(dir);
}

TEST(IndexStore, DetectsDamage) {
    const auto set = build_indices(small_corpus(), MockEmbedder(16), HnswParams{});
    const auto dir = temp_dir("damage");
    save_index_set(set, dir);
    {
        std::ofstream(dir / "trial_vectors.seg", std::ios::binary | std::ios::trunc) << "garbage";
    }
    try {
        load_index_set(dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IndexFormat);
    }
    fs::remove(dir / "manifest.json");
    try {
        load_index_set(dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IndexFormat);
    }
    fs::remove_all(dir);
}

TEST(IndexStore, AtomicWriteReplacesContent) {
    const auto dir = temp_dir("atomic");
    write_file_atomic(dir / "f.txt", "one");
    write_file_atomic(dir / "f.txt", "two");
    EXPECT_EQ(read_file(dir / "f.txt"), "two");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    EXPECT_EQ(entries, 1u);
    fs::remove_all(dir);
}
