#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/oracles.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/lexical_index.hpp"

using namespace trialmatch;

namespace {

std::vector<LexicalDocument> docs(std::initializer_list<std::pair<const char*, const char*>> items) {
    std::vector<LexicalDocument> out;
    for (const auto& [id, text] : items) out.push_back({id, text, {}});
    return out;
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

}  // namespace

TEST(LexicalIndex, BuildCountsPostings) {
    const auto idx = LexicalIndex::build(docs({{"d1", "a b"}, {"d2", "b b c"}}), IndexLevel::Trial);
    EXPECT_EQ(idx.doc_count(), 2u);
    EXPECT_DOUBLE_EQ(idx.avg_doc_length(), 2.5);
    EXPECT_EQ(idx.postings("a"), (std::vector<Posting>{{0, 1}}));
    EXPECT_EQ(idx.postings("b"), (std::vector<Posting>{{0, 1}, {1, 2}}));
    EXPECT_EQ(idx.postings("c"), (std::vector<Posting>{{1, 1}}));
    EXPECT_TRUE(idx.postings("zzz").empty());
}

TEST(LexicalIndex, EmptyAndDuplicate) {
    const auto empty = LexicalIndex::build({}, IndexLevel::Criterion);
    EXPECT_EQ(empty.doc_count(), 0u);
    const std::vector<std::string> q{"a"};
    EXPECT_TRUE(empty.topk(q, 5).empty());
    try {
        LexicalIndex::build(docs({{"d1", "a"}, {"d1", "b"}}), IndexLevel::Trial);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DuplicateDocId);
    }
}

TEST(LexicalIndex, SingleDocHandExample) {
    const auto idx = LexicalIndex::build(docs({{"d1", "cancer"}}), IndexLevel::Trial);
    const std::vector<std::string> q{"cancer"};
    EXPECT_NEAR(idx.bm25_score(q, "d1"), std::log(4.0 / 3.0), 1e-12);
    EXPECT_NEAR(idx.bm25_score(q, "d1"), 0.28768, 1e-5);
    const std::vector<std::string> absent{"melanoma"};
    EXPECT_EQ(idx.bm25_score(absent, "d1"), 0.0);
    try {
        idx.bm25_score(q, "nope");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownDocId);
    }
}

TEST(LexicalIndex, EnrichmentTermsAddOneEach) {
    std::vector<LexicalDocument> d{{"d1", "breast carcinoma", {"breast cancer", "breast cancer"}}};
    const auto idx = LexicalIndex::build(d, IndexLevel::Criterion);
    EXPECT_EQ(idx.doc_length("d1"), 4u);  // "breast", "carcinoma", + "breast", "cancer"
    EXPECT_EQ(idx.postings("breast"), (std::vector<Posting>{{0, 2}}));
    EXPECT_EQ(idx.postings("cancer"), (std::vector<Posting>{{0, 1}}));
}

TEST(LexicalIndex, IdenticalDocsScoreIdentically) {
    const auto idx = LexicalIndex::build(docs({{"x", "her2 positive"}, {"y", "her2 positive"}, {"z", "other"}}),
                                         IndexLevel::Trial);
    const std::vector<std::string> q{"her2"};
    EXPECT_EQ(idx.bm25_score(q, "x"), idx.bm25_score(q, "y"));
    const auto top = idx.topk(q, 10);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].id, "x");
    EXPECT_EQ(top[1].id, "y");
}

TEST(LexicalIndex, RandomCorporaMatchNaiveFormula) {
    std::mt19937_64 rng(99);
    const std::vector<std::string> vocab{"t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9",
                                         "t10", "t11", "t12", "t13", "t14", "t15", "t16", "t17", "t18", "t19"};
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<LexicalDocument> corpus;
        std::vector<oracle::Tokens> toks;
        for (std::size_t i = 0; i < n; ++i) {
            std::string text;
            const std::size_t len = 1 + rng() % 20;
            oracle::Tokens t;
            for (std::size_t w = 0; w < len; ++w) {
                t.push_back(vocab[rng() % vocab.size()]);
                text += t.back() + " ";
            }
            toks.push_back(t);
            corpus.push_back({"doc" + std::to_string(i), text, {}});
        }
        const auto idx = LexicalIndex::build(corpus, IndexLevel::Trial);
        oracle::Tokens q;
        for (std::size_t w = 0, m = 1 + rng() % 5; w < m; ++w) q.push_back(vocab[rng() % vocab.size()]);
        std::vector<std::pair<double, std::string>> expected;
        for (std::size_t i = 0; i < n; ++i) {
            const double want = oracle::bm25(toks, q, i);
            EXPECT_NEAR(idx.bm25_score(q, corpus[i].id), want, 1e-9);
            if (want > 0) expected.emplace_back(want, corpus[i].id);
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const std::size_t k = 1 + rng() % 10;
        const auto top = idx.topk(q, k);
        ASSERT_EQ(top.size(), std::min(k, expected.size()));
        for (std::size_t i = 0; i < top.size(); ++i) {
            EXPECT_NEAR(top[i].score, expected[i].first, 1e-9);
            EXPECT_EQ(top[i].score, idx.bm25_score(q, top[i].id));
        }
    }
}

TEST(LexicalIndex, TopkToyCorpusAndFilter) {
    const auto idx =
        LexicalIndex::build(docs({{"a", "lung cancer lung"}, {"b", "breast cancer"}, {"c", "lung nodule biopsy"}}),
                            IndexLevel::Trial);
    const auto q = words("lung cancer");
    std::vector<std::pair<double, std::string>> all;
    for (const char* id : {"a", "b", "c"}) all.emplace_back(idx.bm25_score(q, id), id);
    std::sort(all.rbegin(), all.rend());
    const auto top = idx.topk(q, 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].id, "a");
    EXPECT_EQ(top[0].score, all[0].first);
    EXPECT_EQ(top[1].score, all[1].first);

    EXPECT_EQ(idx.topk(q, 100).size(), 3u);
    const IdFilter only_c{"c"};
    const auto filtered = idx.topk(q, 5, &only_c);
    ASSERT_EQ(filtered.size(), 1u);
    EXPECT_EQ(filtered[0].id, "c");
    try {
        idx.topk(q, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidArgument);
    }
}

TEST(LexicalIndex, SaveLoadRoundTrip) {
    std::vector<LexicalDocument> d{{"x", "alpha beta beta", {"gamma"}}, {"y", "beta delta", {}}};
    const auto idx = LexicalIndex::build(d, IndexLevel::Criterion, Bm25Params{1.5, 0.5});
    std::stringstream buf;
    idx.save(buf);
    const auto back = LexicalIndex::load(buf);
    EXPECT_EQ(back.level(), IndexLevel::Criterion);
    EXPECT_EQ(back.doc_ids(), idx.doc_ids());
    EXPECT_EQ(back.term_count(), idx.term_count());
    const auto q = words("beta gamma delta");
    for (const char* id : {"x", "y"}) EXPECT_EQ(back.bm25_score(q, id), idx.bm25_score(q, id));

    std::stringstream junk("not an index");
    try {
        LexicalIndex::load(junk);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IndexFormat);
    }
}
