#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/eval.hpp"

using namespace trialmatch;

namespace {

/// One patient "p" whose ranking d0..dn-1 carries the given grades.
std::pair<Ranking, Qrels> graded(const std::vector<int>& grades) {
    Ranking r;
    Qrels q;
    for (std::size_t i = 0; i < grades.size(); ++i) {
        r.push_back("d" + std::to_string(i));
        q.judgments["p"][r.back()] = grades[i];
    }
    return {r, q};
}

Qrels expect_error(std::string_view text, Errc code) {
    try {
        return load_qrels(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
        return {};
    }
    ADD_FAILURE() << "no error for " << text;
    return {};
}

}  // namespace

TEST(Qrels, Parse) {
    const auto q = load_qrels("7 0 NCT01234567 2\n# comment\n\n7 0 NCT0000001 0\n8 0 NCT0000002 1\n7 0 NCT01234567 2\n");
    EXPECT_EQ(q.grade("7", "NCT01234567"), 2);
    EXPECT_EQ(q.grade("8", "NCT0000002"), 1);
    EXPECT_EQ(q.grade("8", "missing"), 0);
    EXPECT_EQ(q.sorted_grades("7"), (std::vector<int>{2, 0}));
}

TEST(Qrels, Errors) {
    expect_error("7 0 NCT1 3\n", Errc::InvalidGrade);
    expect_error("7 0 NCT1 -1\n", Errc::InvalidGrade);
    expect_error("7 0 NCT1 2\n7 0 NCT1 1\n", Errc::MalformedLine);
    expect_error("7 NCT1 2\n", Errc::MalformedLine);
    expect_error("7 0 NCT1 two\n", Errc::MalformedLine);
}

TEST(Run, ParseBothShapesAndWrite) {
    const auto runs = load_run("p1 Q0 B 2 0.5 tag\np1 Q0 A 1 0.9 tag\np2 C 1 3.0\n");
    ASSERT_EQ(runs.size(), 2u);
    EXPECT_EQ(runs.at("p1"), (Ranking{"A", "B"}));
    EXPECT_EQ(runs.at("p2"), (Ranking{"C"}));
    const auto text = write_run(runs, {{"p1", {0.9, 0.5}}}, "x");
    EXPECT_EQ(load_run(text), runs);
    EXPECT_THROW(load_run("p1 A\n"), Error);
}

TEST(Metrics, PrecisionExamples) {
    auto [r, q] = graded({2, 2, 2, 2, 2});
    EXPECT_DOUBLE_EQ(precision_at_k(r, q, "p", 5), 1.0);
    std::tie(r, q) = graded({2, 0, 2, 1, 0});
    EXPECT_DOUBLE_EQ(precision_at_k(r, q, "p", 5), 0.4);
    EXPECT_DOUBLE_EQ(precision_at_k(r, q, "p", 5, PrecisionMode::HalfK), 0.2);
    EXPECT_DOUBLE_EQ(precision_at_k({}, q, "p", 5), 0.0);
    EXPECT_THROW(precision_at_k(r, q, "p", 0), Error);
}

TEST(Metrics, NdcgExamples) {
    auto [r, q] = graded({2, 2, 1, 0});
    EXPECT_DOUBLE_EQ(ndcg_at_k(r, q, "p", 4), 1.0);
    std::tie(r, q) = graded({0, 2});
    EXPECT_NEAR(ndcg_at_k(r, q, "p", 2), 0.63093, 1e-5);
    std::tie(r, q) = graded({0, 0, 0});
    EXPECT_EQ(ndcg_at_k(r, q, "p", 3), 0.0);
}

TEST(Metrics, MrrExamples) {
    Qrels q;
    q.judgments["a"]["x3"] = 2;
    q.judgments["b"]["y2"] = 2;
    RunsByPatient runs{{"a", {"x1", "x2", "x3"}}, {"b", {"y1", "y2"}}};
    const auto m = mrr(runs, q, 10);
    EXPECT_NEAR(m.mean, 5.0 / 12.0, 1e-12);
    EXPECT_NEAR(m.std, (0.5 - 1.0 / 3.0) / 2.0, 1e-12);

    RunsByPatient first{{"a", {"x3"}}, {"b", {"y2", "y1"}}};
    EXPECT_DOUBLE_EQ(mrr(first, q, 10).mean, 1.0);
    EXPECT_DOUBLE_EQ(mrr(first, q, 10).std, 0.0);
    RunsByPatient none{{"a", {"x1"}}, {"b", {"y1"}}};
    EXPECT_DOUBLE_EQ(mrr(none, q, 10).mean, 0.0);
}

TEST(Metrics, RecallAndMarExamples) {
    Qrels q;
    q.judgments["a"] = {{"t1", 2}, {"t3", 2}};
    q.judgments["b"] = {{"u9", 2}};
    RunsByPatient runs{{"a", {"t1", "t2", "t3", "t4", "t5"}}, {"b", {"u1", "u2", "u3", "u4", "u5", "u9"}}};
    const auto r = overall_recall_and_mar(runs, q, 5);
    EXPECT_DOUBLE_EQ(r.overall_recall, 0.5);
    ASSERT_TRUE(r.mean_average_rank.has_value());
    EXPECT_DOUBLE_EQ(r.mean_average_rank->mean, 2.0);
    EXPECT_DOUBLE_EQ(r.mean_average_rank->std, 0.0);

    RunsByPatient perfect{{"a", {"t1"}}, {"b", {"u9"}}};
    const auto p = overall_recall_and_mar(perfect, q, 5);
    EXPECT_DOUBLE_EQ(p.overall_recall, 1.0);
    EXPECT_DOUBLE_EQ(p.mean_average_rank->mean, 1.0);
    EXPECT_THROW(overall_recall_and_mar(perfect, q, 0), Error);
}

TEST(Metrics, RecallAtSizeExample) {
    Qrels q;
    q.judgments["p"] = {{"T1", 2}, {"T4", 1}, {"T5", 2}, {"T2", 0}};
    std::map<std::size_t, std::map<std::string, std::set<std::string>>> sets;
    sets[2]["p"] = {"T1", "T2"};
    sets[5]["p"] = {"T1", "T2", "T3", "T4", "T5"};
    std::set<std::string> all;
    for (int i = 0; i < 10; ++i) all.insert("T" + std::to_string(i));
    sets[10]["p"] = all;
    const auto curve = recall_at_size(sets, q);
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_EQ(curve[0].first, 2u);
    EXPECT_DOUBLE_EQ(curve[0].second, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(curve[1].second, 1.0);
    EXPECT_DOUBLE_EQ(curve[2].second, 1.0);
}

TEST(Metrics, OracleEquivalence) {
    std::mt19937_64 rng(2024);
    for (int instance = 0; instance < 200; ++instance) {
        const std::size_t n = rng() % 51;
        std::vector<int> grades(n);
        for (auto& g : grades) g = static_cast<int>(rng() % 3);
        auto [r, q] = graded(grades);
        // judged trials outside the ranking shape the ideal ordering
        std::vector<int> all = grades;
        for (std::size_t extra = rng() % 4; extra > 0; --extra) {
            const int g = static_cast<int>(rng() % 3);
            q.judgments["p"]["x" + std::to_string(extra)] = g;
            all.push_back(g);
        }
        for (std::size_t k : {1, 5, 10, 20, 50}) {
            EXPECT_NEAR(precision_at_k(r, q, "p", k), oracle::precision(grades, k), 1e-9);
            EXPECT_NEAR(precision_at_k(r, q, "p", k, PrecisionMode::HalfK), oracle::precision(grades, k, 2.0), 1e-9);
            EXPECT_NEAR(ndcg_at_k(r, q, "p", k), oracle::ndcg(grades, all, k), 1e-9);
            EXPECT_NEAR(reciprocal_rank(r, q, "p", k), oracle::reciprocal_rank(grades, k), 1e-9);
        }
    }

    for (int instance = 0; instance < 200; ++instance) {
        RunsByPatient runs;
        Qrels q;
        std::vector<std::vector<int>> per;
        std::vector<double> rr;
        const std::size_t patients = 1 + rng() % 6;
        const std::size_t k = 1 + rng() % 20;
        for (std::size_t p = 0; p < patients; ++p) {
            const auto id = "p" + std::to_string(p);
            std::vector<int> g(rng() % 51);
            for (auto& x : g) x = static_cast<int>(rng() % 3);
            auto& ranking = runs[id];
            for (std::size_t i = 0; i < g.size(); ++i) {
                ranking.push_back("t" + std::to_string(i));
                q.judgments[id][ranking.back()] = g[i];
            }
            per.push_back(g);
            rr.push_back(oracle::reciprocal_rank(g, k));
        }
        const auto expected = oracle::recall_mar(per, k);
        const auto got = overall_recall_and_mar(runs, q, k);
        EXPECT_NEAR(got.overall_recall, expected.recall, 1e-9);
        ASSERT_EQ(got.mean_average_rank.has_value(), expected.mar.has_value());
        if (expected.mar) {
            EXPECT_NEAR(got.mean_average_rank->mean, expected.mar->first, 1e-9);
            EXPECT_NEAR(got.mean_average_rank->std, expected.mar->second, 1e-9);
        }
        const auto [mean, std] = oracle::mean_std(rr);
        EXPECT_NEAR(mrr(runs, q, k).mean, mean, 1e-9);
        EXPECT_NEAR(mrr(runs, q, k).std, std, 1e-9);
    }
}

TEST(Metrics, PermutingBelowKChangesNothing) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> grades(5 + rng() % 40);
        for (auto& g : grades) g = static_cast<int>(rng() % 3);
        auto [r, q] = graded(grades);
        const std::size_t k = 1 + rng() % (r.size() - 1);
        auto shuffled = r;
        std::shuffle(shuffled.begin() + static_cast<std::ptrdiff_t>(k), shuffled.end(), rng);
        EXPECT_EQ(precision_at_k(r, q, "p", k), precision_at_k(shuffled, q, "p", k));
        EXPECT_EQ(ndcg_at_k(r, q, "p", k), ndcg_at_k(shuffled, q, "p", k));
        EXPECT_EQ(reciprocal_rank(r, q, "p", k), reciprocal_rank(shuffled, q, "p", k));
        const auto a = overall_recall_and_mar({{"p", r}}, q, k);
        const auto b = overall_recall_and_mar({{"p", shuffled}}, q, k);
        EXPECT_EQ(a.overall_recall, b.overall_recall);
        EXPECT_EQ(a.mean_average_rank.has_value(), b.mean_average_rank.has_value());
    }
}

TEST(Metrics, IdealTopKGivesNdcgOne) {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 100; ++t) {
        std::vector<int> grades(1 + rng() % 30);
        for (auto& g : grades) g = static_cast<int>(rng() % 3);
        std::sort(grades.rbegin(), grades.rend());
        if (grades.front() == 0) continue;
        auto [r, q] = graded(grades);
        for (std::size_t k : {1, 3, 10}) EXPECT_NEAR(ndcg_at_k(r, q, "p", k), 1.0, 1e-12);
    }
}

TEST(Evaluate, ReportIncludesMissingPatientsAndSerializes) {
    Qrels q;
    q.judgments["a"] = {{"x3", 2}, {"x1", 1}};
    q.judgments["b"] = {{"y2", 2}};
    q.judgments["c"] = {{"z1", 2}};
    RunsByPatient runs{{"a", {"x1", "x2", "x3"}}, {"b", {"y1", "y2"}}};
    EvalOptions opts;
    opts.curve_sizes = {1, 2, 3};
    const auto report = evaluate(runs, q, opts);
    ASSERT_EQ(report.patients.size(), 3u);
    EXPECT_NEAR(report.mrr.mean, (1.0 / 3 + 0.5 + 0.0) / 3, 1e-12);
    EXPECT_NEAR(report.overall.at(5).overall_recall, 2.0 / 3.0, 1e-12);
    ASSERT_EQ(report.recall_curve.size(), 3u);
    EXPECT_DOUBLE_EQ(report.recall_curve[0].second, 1.0 / 4.0);
    EXPECT_DOUBLE_EQ(report.recall_curve[2].second, 3.0 / 4.0);

    const auto j = report.to_json();
    EXPECT_EQ(j["patients"], 3);
    EXPECT_TRUE(j["aggregate"].contains("nDCG@10"));
    EXPECT_TRUE(j["aggregate"].contains("MeanAverageRank@20"));
    const auto csv = report.per_patient_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "patient_id,P@5,P@10,P@20,nDCG@5,nDCG@10,nDCG@20,RR");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(report.recall_curve_tsv().substr(0, 12), "size\trecall\n");
}
