#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace trialmatch {

/// patient -> trial -> grade (0 irrelevant, 1 excluded, 2 eligible).
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;

    /// Unjudged pairs are grade 0.
    int grade(const std::string& patient, const std::string& trial) const;
    /// The patient's grades, descending.
    std::vector<int> sorted_grades(const std::string& patient) const;
};

/// "topic 0 doc grade" lines; blank lines and '#' comments skipped. Throws
/// MalformedLine (bad shape, or a repeat with a different grade) and
/// InvalidGrade.
Qrels load_qrels(std::string_view trec_text);

using Ranking = std::vector<std::string>;
using RunsByPatient = std::map<std::string, Ranking>;

/// TREC run lines "topic Q0 doc rank score tag" or "topic doc rank score".
/// Each patient's list is ordered by rank, then score desc, then doc id.
RunsByPatient load_run(std::string_view run_text);

/// Six-column TREC run text, rank from 1.
std::string write_run(const RunsByPatient& runs, const std::map<std::string, std::vector<double>>& scores,
                      std::string_view tag);

enum class PrecisionMode { Standard, HalfK };  // 1/k, or the literal 1/(2k)

inline constexpr int kRelevantGrade = 2;

double precision_at_k(const Ranking& ranking, const Qrels& qrels, const std::string& patient, std::size_t k,
                      PrecisionMode mode = PrecisionMode::Standard);
double ndcg_at_k(const Ranking& ranking, const Qrels& qrels, const std::string& patient, std::size_t k);
/// 1 / rank of the first grade-2 trial within the top k, else 0.
double reciprocal_rank(const Ranking& ranking, const Qrels& qrels, const std::string& patient, std::size_t k);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& values);
double median(std::vector<double> values);

MeanStd mrr(const RunsByPatient& runs, const Qrels& qrels, std::size_t k);

struct RecallAndMar {
    double overall_recall = 0.0;
    std::optional<MeanStd> mean_average_rank;  // absent when nobody retrieved anything
    std::size_t patients_with_hit = 0;
};

RecallAndMar overall_recall_and_mar(const RunsByPatient& runs, const Qrels& qrels, std::size_t k);

/// Micro recall per size: retrieved relevant (grade >= 1) over all relevant,
/// summed across the qrels patients.
std::vector<std::pair<std::size_t, double>> recall_at_size(
    const std::map<std::size_t, std::map<std::string, std::set<std::string>>>& candidate_sets_by_size,
    const Qrels& qrels);

struct EvalOptions {
    std::vector<std::size_t> cutoffs{5, 10, 20};
    std::vector<std::size_t> curve_sizes{5, 10, 20, 50, 100, 200, 500, 1000};
    PrecisionMode precision_mode = PrecisionMode::Standard;
};

struct PatientMetrics {
    std::string patient_id;
    std::map<std::size_t, double> precision;
    std::map<std::size_t, double> ndcg;
    double reciprocal_rank = 0.0;
    std::vector<std::pair<std::size_t, double>> recall_curve;
};

struct EvalReport {
    std::vector<PatientMetrics> patients;
    std::map<std::size_t, MeanStd> precision;
    std::map<std::size_t, double> precision_median;
    std::map<std::size_t, MeanStd> ndcg;
    std::map<std::size_t, double> ndcg_median;
    MeanStd mrr;
    std::map<std::size_t, RecallAndMar> overall;
    std::vector<std::pair<std::size_t, double>> recall_curve;

    nlohmann::ordered_json to_json() const;
    std::string per_patient_csv() const;
    std::string recall_curve_tsv() const;
};

/// Patients: those in the run plus any qrels patient the run left out (an
/// empty ranking).
EvalReport evaluate(const RunsByPatient& runs, const Qrels& qrels, const EvalOptions& options = {});

}  // namespace trialmatch
