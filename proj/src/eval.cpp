#include "trialmatch/eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename F>
void for_each_line(std::string_view content, F&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string_view::npos) nl = content.size();
        ++line_no;
        auto line = text::trim(content.substr(pos, nl - pos));
        if (!line.empty() && line.front() != '#') fn(line_no, line);
        pos = nl + 1;
    }
}

std::optional<long long> to_int(std::string_view s) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> to_double(std::string_view s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(std::string(s), &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string line_error(std::size_t line_no, const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

}  // namespace

int Qrels::grade(const std::string& patient, const std::string& trial) const {
    auto p = judgments.find(patient);
    if (p == judgments.end()) return 0;
    auto t = p->second.find(trial);
    return t == p->second.end() ? 0 : t->second;
}

std::vector<int> Qrels::sorted_grades(const std::string& patient) const {
    std::vector<int> out;
    if (auto p = judgments.find(patient); p != judgments.end()) {
        for (const auto& [trial, g] : p->second) out.push_back(g);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

Qrels load_qrels(std::string_view trec_text) {
    Qrels q;
    for_each_line(trec_text, [&](std::size_t line_no, std::string_view line) {
        const auto f = fields_of(line);
        if (f.size() != 4) throw Error(Errc::MalformedLine, line_error(line_no, "expected 4 columns"));
        const auto grade = to_int(f[3]);
        if (!grade) throw Error(Errc::MalformedLine, line_error(line_no, "grade is not an integer"));
        if (*grade < 0 || *grade > 2) {
            throw Error(Errc::InvalidGrade, line_error(line_no, "grade " + std::string(f[3]) + " not in {0,1,2}"));
        }
        auto [it, inserted] = q.judgments[std::string(f[0])].emplace(std::string(f[2]), static_cast<int>(*grade));
        if (!inserted && it->second != *grade) {
            throw Error(Errc::MalformedLine, line_error(line_no, "conflicting grade for " + std::string(f[0]) + " " +
                                                                     std::string(f[2])));
        }
    });
    return q;
}

RunsByPatient load_run(std::string_view run_text) {
    struct Row {
        long long rank;
        double score;
        std::string doc;
    };
    std::map<std::string, std::vector<Row>> rows;
    for_each_line(run_text, [&](std::size_t line_no, std::string_view line) {
        const auto f = fields_of(line);
        std::string_view topic, doc, rank, score;
        if (f.size() == 6) {
            topic = f[0], doc = f[2], rank = f[3], score = f[4];
        } else if (f.size() == 4) {
            topic = f[0], doc = f[1], rank = f[2], score = f[3];
        } else {
            throw Error(Errc::MalformedLine, line_error(line_no, "expected 6 (TREC) or 4 columns"));
        }
        const auto r = to_int(rank);
        const auto s = to_double(score);
        if (!r || !s) throw Error(Errc::MalformedLine, line_error(line_no, "bad rank or score"));
        rows[std::string(topic)].push_back({*r, *s, std::string(doc)});
    });
    RunsByPatient runs;
    for (auto& [topic, list] : rows) {
        std::sort(list.begin(), list.end(), [](const Row& a, const Row& b) {
            return std::tie(a.rank, b.score, a.doc) < std::tie(b.rank, a.score, b.doc);
        });
        auto& ranking = runs[topic];
        for (auto& row : list) {
            if (std::find(ranking.begin(), ranking.end(), row.doc) == ranking.end()) ranking.push_back(row.doc);
        }
    }
    return runs;
}

std::string write_run(const RunsByPatient& runs, const std::map<std::string, std::vector<double>>& scores,
                      std::string_view tag) {
    std::string out;
    for (const auto& [patient, ranking] : runs) {
        const auto sc = scores.find(patient);
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            const double s = sc != scores.end() && i < sc->second.size() ? sc->second[i]
                                                                         : static_cast<double>(ranking.size() - i);
            out += patient + " Q0 " + ranking[i] + " " + std::to_string(i + 1) + " " + fmt(s) + " " + std::string(tag) +
                   "\n";
        }
    }
    return out;
}

double precision_at_k(const Ranking& ranking, const Qrels& qrels, const std::string& patient, std::size_t k,
                      PrecisionMode mode) {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        if (qrels.grade(patient, ranking[i]) == kRelevantGrade) ++hits;
    }
    const double denom = mode == PrecisionMode::Standard ? static_cast<double>(k) : 2.0 * static_cast<double>(k);
    return static_cast<double>(hits) / denom;
}

double ndcg_at_k(const Ranking& ranking, const Qrels& qrels, const std::string& patient, std::size_t k) {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        dcg += qrels.grade(patient, ranking[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    const auto ideal = qrels.sorted_grades(patient);
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
        idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double reciprocal_rank(const Ranking& ranking, const Qrels& qrels, const std::string& patient, std::size_t k) {
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        if (qrels.grade(patient, ranking[i]) == kRelevantGrade) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

MeanStd mrr(const RunsByPatient& runs, const Qrels& qrels, std::size_t k) {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
    std::vector<double> rr;
    for (const auto& [patient, ranking] : runs) rr.push_back(reciprocal_rank(ranking, qrels, patient, k));
    return mean_std(rr);
}

RecallAndMar overall_recall_and_mar(const RunsByPatient& runs, const Qrels& qrels, std::size_t k) {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
    RecallAndMar out;
    std::vector<double> average_ranks;
    for (const auto& [patient, ranking] : runs) {
        double rank_sum = 0.0;
        std::size_t found = 0;
        for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
            if (qrels.grade(patient, ranking[i]) == kRelevantGrade) {
                rank_sum += static_cast<double>(i + 1);
                ++found;
            }
        }
        if (found > 0) average_ranks.push_back(rank_sum / static_cast<double>(found));
    }
    out.patients_with_hit = average_ranks.size();
    if (!runs.empty()) out.overall_recall = static_cast<double>(average_ranks.size()) / static_cast<double>(runs.size());
    if (!average_ranks.empty()) out.mean_average_rank = mean_std(average_ranks);
    return out;
}

std::vector<std::pair<std::size_t, double>> recall_at_size(
    const std::map<std::size_t, std::map<std::string, std::set<std::string>>>& candidate_sets_by_size,
    const Qrels& qrels) {
    std::size_t total = 0;
    for (const auto& [patient, trials] : qrels.judgments) {
        for (const auto& [trial, g] : trials) total += g >= 1 ? 1 : 0;
    }
    std::vector<std::pair<std::size_t, double>> curve;
    for (const auto& [size, sets] : candidate_sets_by_size) {
        std::size_t hit = 0;
        for (const auto& [patient, trials] : qrels.judgments) {
            auto s = sets.find(patient);
            if (s == sets.end()) continue;
            for (const auto& [trial, g] : trials) hit += (g >= 1 && s->second.contains(trial)) ? 1 : 0;
        }
        curve.emplace_back(size, total > 0 ? static_cast<double>(hit) / static_cast<double>(total) : 0.0);
    }
    return curve;
}

EvalReport evaluate(const RunsByPatient& input_runs, const Qrels& qrels, const EvalOptions& options) {
    RunsByPatient runs = input_runs;
    for (const auto& [patient, trials] : qrels.judgments) runs.try_emplace(patient);

    EvalReport report;
    std::map<std::size_t, std::vector<double>> p_values, n_values;
    std::vector<double> rr_values;
    for (const auto& [patient, ranking] : runs) {
        PatientMetrics m;
        m.patient_id = patient;
        for (auto k : options.cutoffs) {
            m.precision[k] = precision_at_k(ranking, qrels, patient, k, options.precision_mode);
            m.ndcg[k] = ndcg_at_k(ranking, qrels, patient, k);
            p_values[k].push_back(m.precision[k]);
            n_values[k].push_back(m.ndcg[k]);
        }
        m.reciprocal_rank = reciprocal_rank(ranking, qrels, patient, ranking.size());
        rr_values.push_back(m.reciprocal_rank);

        std::map<std::size_t, std::map<std::string, std::set<std::string>>> sets;
        Qrels mine;
        if (auto it = qrels.judgments.find(patient); it != qrels.judgments.end()) mine.judgments[patient] = it->second;
        for (auto size : options.curve_sizes) {
            const auto n = std::min(size, ranking.size());
            sets[size][patient] = std::set<std::string>(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n));
        }
        m.recall_curve = recall_at_size(sets, mine);
        report.patients.push_back(std::move(m));
    }
    for (auto k : options.cutoffs) {
        report.precision[k] = mean_std(p_values[k]);
        report.precision_median[k] = median(p_values[k]);
        report.ndcg[k] = mean_std(n_values[k]);
        report.ndcg_median[k] = median(n_values[k]);
        report.overall[k] = overall_recall_and_mar(runs, qrels, k);
    }
    report.mrr = mean_std(rr_values);

    std::map<std::size_t, std::map<std::string, std::set<std::string>>> sets;
    for (auto size : options.curve_sizes) {
        for (const auto& [patient, ranking] : runs) {
            const auto n = std::min(size, ranking.size());
            sets[size][patient] = std::set<std::string>(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n));
        }
    }
    report.recall_curve = recall_at_size(sets, qrels);
    return report;
}

nlohmann::ordered_json EvalReport::to_json() const {
    auto ms = [](const MeanStd& m) { return nlohmann::ordered_json{{"mean", m.mean}, {"std", m.std}}; };
    nlohmann::ordered_json j;
    j["patients"] = patients.size();
    nlohmann::ordered_json agg;
    for (const auto& [k, v] : precision) {
        agg["P@" + std::to_string(k)] = {{"mean", v.mean}, {"std", v.std}, {"median", precision_median.at(k)}};
    }
    for (const auto& [k, v] : ndcg) {
        agg["nDCG@" + std::to_string(k)] = {{"mean", v.mean}, {"std", v.std}, {"median", ndcg_median.at(k)}};
    }
    agg["MRR"] = ms(mrr);
    for (const auto& [k, v] : overall) {
        agg["OverallRecall@" + std::to_string(k)] = v.overall_recall;
        agg["MeanAverageRank@" + std::to_string(k)] = v.mean_average_rank ? ms(*v.mean_average_rank) : nlohmann::ordered_json();
    }
    j["aggregate"] = agg;
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (const auto& [size, r] : recall_curve) curve.push_back({{"size", size}, {"recall", r}});
    j["recall_curve"] = curve;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& p : patients) {
        nlohmann::ordered_json row;
        row["patient_id"] = p.patient_id;
        for (const auto& [k, v] : p.precision) row["P@" + std::to_string(k)] = v;
        for (const auto& [k, v] : p.ndcg) row["nDCG@" + std::to_string(k)] = v;
        row["RR"] = p.reciprocal_rank;
        per.push_back(row);
    }
    j["per_patient"] = per;
    return j;
}

std::string EvalReport::per_patient_csv() const {
    std::string out = "patient_id";
    if (!patients.empty()) {
        for (const auto& [k, v] : patients.front().precision) out += ",P@" + std::to_string(k);
        for (const auto& [k, v] : patients.front().ndcg) out += ",nDCG@" + std::to_string(k);
    }
    out += ",RR\n";
    for (const auto& p : patients) {
        out += p.patient_id;
        for (const auto& [k, v] : p.precision) out += "," + fmt(v);
        for (const auto& [k, v] : p.ndcg) out += "," + fmt(v);
        out += "," + fmt(p.reciprocal_rank) + "\n";
    }
    return out;
}

std::string EvalReport::recall_curve_tsv() const {
    std::string out = "size\trecall\n";
    for (const auto& [size, r] : recall_curve) out += std::to_string(size) + "\t" + fmt(r) + "\n";
    return out;
}

}  // namespace trialmatch
