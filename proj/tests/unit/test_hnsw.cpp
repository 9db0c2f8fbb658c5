#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "../support/oracles.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/hnsw.hpp"

using namespace trialmatch;

namespace {

using Data = std::vector<std::pair<std::string, std::vector<float>>>;

Data make_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "v%05zu", i);
        d.emplace_back(buf, oracle::random_unit(rng, dim));
    }
    return d;
}

HnswIndex build(const Data& d, std::size_t dim, HnswParams p = {}) {
    HnswIndex idx(dim, p);
    for (const auto& [id, v] : d) idx.insert(id, v);
    idx.finalize();
    return idx;
}

}  // namespace

TEST(Hnsw, IdentityQueryRanksFirst) {
    const auto d = make_points(300, 16, 1);
    const auto idx = build(d, 16);
    for (std::size_t i = 0; i < d.size(); i += 37) {
        const auto r = idx.search(d[i].second, 3);
        ASSERT_FALSE(r.empty());
        EXPECT_EQ(r[0].id, d[i].first);
        EXPECT_NEAR(r[0].similarity, 1.0, 1e-6);
    }
}

TEST(Hnsw, RecallAgainstExactKnn) {
    const std::size_t dim = 64;
    const auto d = make_points(1000, dim, 2);
    auto idx = build(d, dim);
    idx.set_ef_search(200);
    std::mt19937_64 rng(3);
    double recall = 0;
    for (int q = 0; q < 100; ++q) {
        const auto query = oracle::random_unit(rng, dim);
        const auto truth = oracle::knn(d, query, 10);
        const auto got = idx.search(query, 10);
        std::set<std::string> t(truth.begin(), truth.end());
        std::size_t hit = 0;
        for (const auto& n : got) hit += t.count(n.id);
        recall += hit / 10.0;
    }
    EXPECT_GE(recall / 100.0, 0.95);
}

TEST(Hnsw, ResultsSortedAndFilterRespected) {
    const auto d = make_points(500, 24, 4);
    const auto idx = build(d, 24);
    IdFilter allowed;
    for (std::size_t i = 0; i < d.size(); i += 5) allowed.insert(d[i].first);
    std::mt19937_64 rng(5);
    for (int q = 0; q < 20; ++q) {
        const auto query = oracle::random_unit(rng, 24);
        const auto r = idx.search(query, 15, &allowed);
        EXPECT_EQ(r.size(), 15u);
        for (std::size_t i = 0; i < r.size(); ++i) {
            EXPECT_TRUE(allowed.contains(r[i].id));
            if (i > 0) {
                EXPECT_TRUE(r[i - 1].similarity > r[i].similarity ||
                            (r[i - 1].similarity == r[i].similarity && r[i - 1].id < r[i].id));
            }
        }
    }
    const IdFilter none;
    EXPECT_TRUE(idx.search(d[0].second, 5, &none).empty());
}

TEST(Hnsw, ErrorsAndLifecycle) {
    HnswIndex idx(4);
    const std::vector<float> v{1, 0, 0, 0};
    idx.insert("a", v);
    try {
        idx.insert("a", v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DuplicateDocId);
    }
    try {
        idx.insert("b", std::vector<float>{1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
    try {
        idx.search(std::vector<float>{1, 0, 0}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
    idx.finalize();
    EXPECT_TRUE(idx.finalized());
    try {
        idx.insert("c", v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IndexFinalized);
    }
    EXPECT_TRUE(HnswIndex(8).search(std::vector<float>(8, 0.0f), 3).empty());
}

TEST(Hnsw, FinalizeMakesEveryNodeReachable) {
    const auto d = make_points(2000, 8, 6);
    const auto idx = build(d, 8, HnswParams{4, 20, 50, 9});
    EXPECT_EQ(idx.reachable_count(), idx.size());
}

TEST(Hnsw, SaveLoadGivesIdenticalResults) {
    const auto d = make_points(400, 16, 7);
    const auto idx = build(d, 16);
    std::stringstream buf;
    idx.save(buf);
    const auto back = HnswIndex::load(buf);
    EXPECT_EQ(back.size(), idx.size());
    EXPECT_EQ(back.params(), idx.params());
    EXPECT_TRUE(back.finalized());
    std::mt19937_64 rng(8);
    for (int q = 0; q < 10; ++q) {
        const auto query = oracle::random_unit(rng, 16);
        EXPECT_EQ(back.search(query, 10), idx.search(query, 10));
    }
}

TEST(Hnsw, SameSeedSameGraph) {
    const auto d = make_points(300, 12, 10);
    std::stringstream a, b;
    build(d, 12).save(a);
    build(d, 12).save(b);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Hnsw, ConcurrentSearchesAgree) {
    const auto d = make_points(800, 16, 11);
    const auto idx = build(d, 16);
    std::mt19937_64 rng(12);
    std::vector<std::vector<float>> queries;
    for (int i = 0; i < 40; ++i) queries.push_back(oracle::random_unit(rng, 16));
    std::vector<std::vector<Neighbor>> serial;
    for (const auto& q : queries) serial.push_back(idx.search(q, 10));
    std::vector<std::vector<Neighbor>> parallel(queries.size());
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < queries.size(); i += 4) parallel[i] = idx.search(queries[i], 10);
        });
    }
    for (auto& th : pool) th.join();
    EXPECT_EQ(parallel, serial);
}
