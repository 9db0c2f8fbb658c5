#pragma once

// Brute-force reference implementations the engine is checked against. They
// follow the textbook formulas directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline double bm25(const std::vector<Tokens>& docs, const Tokens& query, std::size_t doc, double k1 = 1.2,
                   double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avgdl = total_len / n;
    double score = 0;
    for (const auto& term : query) {
        double df = 0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) df += 1;
        }
        if (df == 0) continue;
        const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
        if (tf == 0) continue;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double len = static_cast<double>(docs[doc].size());
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl));
    }
    return score;
}

/// Exact top-k by dot product, ties by ascending id.
inline std::vector<std::string> knn(const std::vector<std::pair<std::string, std::vector<float>>>& data,
                                    const std::vector<float>& q, std::size_t k) {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& [id, v] : data) {
        double s = 0;
        for (std::size_t i = 0; i < q.size(); ++i) s += static_cast<double>(v[i]) * q[i];
        all.emplace_back(s, id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
    return out;
}

inline std::vector<float> random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> v(dim);
    double norm = 0;
    for (auto& x : v) {
        x = n(rng);
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
}

// ---- ranking metrics over explicit grade lists --------------------------

/// grades[i] = qrels grade of the trial at rank i+1.
inline double precision(const std::vector<int>& grades, std::size_t k, double factor = 1.0) {
    double hits = 0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) hits += grades[i] == 2 ? 1 : 0;
    return hits / (factor * static_cast<double>(k));
}

inline double ndcg(const std::vector<int>& grades, std::vector<int> all_grades, std::size_t k) {
    double dcg = 0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) dcg += grades[i] / std::log2(i + 2.0);
    std::sort(all_grades.rbegin(), all_grades.rend());
    double idcg = 0;
    for (std::size_t i = 0; i < std::min(k, all_grades.size()); ++i) idcg += all_grades[i] / std::log2(i + 2.0);
    return idcg == 0 ? 0.0 : dcg / idcg;
}

inline double reciprocal_rank(const std::vector<int>& grades, std::size_t k) {
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
        if (grades[i] == 2) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0, 0};
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

struct RecallMar {
    double recall = 0;
    std::optional<std::pair<double, double>> mar;
};

inline RecallMar recall_mar(const std::vector<std::vector<int>>& per_patient_grades, std::size_t k) {
    RecallMar out;
    std::vector<double> avg_ranks;
    for (const auto& g : per_patient_grades) {
        std::vector<double> ranks;
        for (std::size_t i = 0; i < std::min(k, g.size()); ++i) {
            if (g[i] == 2) ranks.push_back(static_cast<double>(i + 1));
        }
        if (!ranks.empty()) avg_ranks.push_back(std::accumulate(ranks.begin(), ranks.end(), 0.0) / ranks.size());
    }
    if (!per_patient_grades.empty()) {
        out.recall = static_cast<double>(avg_ranks.size()) / static_cast<double>(per_patient_grades.size());
    }
    if (!avg_ranks.empty()) out.mar = mean_std(avg_ranks);
    return out;
}

}  // namespace oracle
