#include "trialmatch/lexical_index.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "binary_io.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/text.hpp"

namespace trialmatch {

namespace {
constexpr std::string_view kMagic = "TMLX";
constexpr std::uint32_t kVersion = 1;

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}
}  // namespace

std::string_view to_string(IndexLevel level) {
    return level == IndexLevel::Trial ? "TRIAL" : "CRITERION";
}

LexicalIndex LexicalIndex::build(std::span<const LexicalDocument> documents, IndexLevel level, Bm25Params params) {
    LexicalIndex index;
    index.level_ = level;
    index.params_ = params;
    index.doc_ids_.reserve(documents.size());
    index.doc_lengths_.reserve(documents.size());

    std::uint64_t total_length = 0;
    for (const auto& doc : documents) {
        const auto number = static_cast<std::uint32_t>(index.doc_ids_.size());
        if (!index.doc_number_.emplace(doc.id, number).second) {
            throw Error(Errc::DuplicateDocId, "duplicate document id: " + doc.id);
        }
        index.doc_ids_.push_back(doc.id);

        std::unordered_map<std::string, std::uint32_t> tf;
        std::uint32_t length = 0;
        for (auto& token : text::lexical_tokens(doc.text)) {
            ++tf[std::move(token)];
            ++length;
        }
        // each distinct enrichment token counts once, however often it repeats
        std::set<std::string> enrichment;
        for (const auto& term : doc.enrichment_terms) {
            for (auto& token : text::lexical_tokens(term)) enrichment.insert(std::move(token));
        }
        for (const auto& token : enrichment) {
            ++tf[token];
            ++length;
        }

        // sorted so posting lists and floating-point sums do not depend on hash order
        std::vector<std::pair<std::string, std::uint32_t>> terms(tf.begin(), tf.end());
        std::sort(terms.begin(), terms.end());
        for (auto& [term, count] : terms) index.postings_[term].push_back({number, count});

        index.doc_lengths_.push_back(length);
        total_length += length;
    }
    index.avg_doc_length_ =
        documents.empty() ? 0.0 : static_cast<double>(total_length) / static_cast<double>(documents.size());
    return index;
}

double LexicalIndex::idf(std::size_t df) const {
    const double n = static_cast<double>(doc_ids_.size());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double LexicalIndex::term_score(double idf_value, std::uint32_t tf, std::uint32_t doc_length) const {
    const double f = tf;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_length / avg_doc_length_);
    return idf_value * f * (params_.k1 + 1.0) / (f + norm);
}

std::uint32_t LexicalIndex::doc_length(std::string_view doc_id) const {
    auto it = doc_number_.find(std::string(doc_id));
    if (it == doc_number_.end()) throw Error(Errc::UnknownDocId, "unknown document id: " + std::string(doc_id));
    return doc_lengths_[it->second];
}

const std::vector<Posting>& LexicalIndex::postings(const std::string& term) const {
    static const std::vector<Posting> empty;
    auto it = postings_.find(term);
    return it == postings_.end() ? empty : it->second;
}

double LexicalIndex::bm25_score(std::span<const std::string> query_terms, std::string_view doc_id) const {
    auto it = doc_number_.find(std::string(doc_id));
    if (it == doc_number_.end()) throw Error(Errc::UnknownDocId, "unknown document id: " + std::string(doc_id));
    const std::uint32_t doc = it->second;
    double score = 0.0;
    for (const auto& term : query_terms) {
        const auto& list = postings(term);
        auto p = std::lower_bound(list.begin(), list.end(), doc,
                                  [](const Posting& a, std::uint32_t d) { return a.doc < d; });
        if (p == list.end() || p->doc != doc) continue;
        score += term_score(idf(list.size()), p->tf, doc_lengths_[doc]);
    }
    return score;
}

std::vector<ScoredDoc> LexicalIndex::topk(std::span<const std::string> query_terms, std::size_t k,
                                          const IdFilter* allowed) const {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");

    // Term-at-a-time in query order: each document's sum is accumulated in the
    // same order as bm25_score, so the two agree bit for bit.
    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& term : query_terms) {
        const auto& list = postings(term);
        if (list.empty()) continue;
        const double w = idf(list.size());
        for (const auto& p : list) {
            if (allowed && !allowed->contains(doc_ids_[p.doc])) continue;
            acc[p.doc] += term_score(w, p.tf, doc_lengths_[p.doc]);
        }
    }

    std::vector<ScoredDoc> hits;
    hits.reserve(acc.size());
    for (const auto& [doc, score] : acc) {
        if (score > 0.0) hits.push_back({doc_ids_[doc], score});
    }
    if (hits.size() > k) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), ranks_before);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), ranks_before);
    }
    return hits;
}

void LexicalIndex::save(std::ostream& out) const {
    binary::put_header(out, kMagic, kVersion);
    binary::put<std::uint8_t>(out, level_ == IndexLevel::Trial ? 0 : 1);
    binary::put(out, params_.k1);
    binary::put(out, params_.b);
    binary::put<std::uint64_t>(out, doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        binary::put_string(out, doc_ids_[i]);
        binary::put<std::uint32_t>(out, doc_lengths_[i]);
    }
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& entry : postings_) terms.push_back(&entry.first);
    std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
    binary::put<std::uint64_t>(out, terms.size());
    for (const auto* term : terms) {
        const auto& list = postings_.at(*term);
        binary::put_string(out, *term);
        binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            binary::put(out, p.doc);
            binary::put(out, p.tf);
        }
    }
    if (!out) throw Error(Errc::Io, "failed writing lexical index segment");
}

LexicalIndex LexicalIndex::load(std::istream& in) {
    binary::check_header(in, kMagic, kVersion);
    LexicalIndex index;
    const auto level = binary::get<std::uint8_t>(in);
    if (level > 1) throw Error(Errc::IndexFormat, "bad index level");
    index.level_ = level == 0 ? IndexLevel::Trial : IndexLevel::Criterion;
    index.params_.k1 = binary::get<double>(in);
    index.params_.b = binary::get<double>(in);
    const auto n = binary::get<std::uint64_t>(in);
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto id = binary::get_string(in);
        const auto length = binary::get<std::uint32_t>(in);
        if (!index.doc_number_.emplace(id, static_cast<std::uint32_t>(i)).second) {
            throw Error(Errc::IndexFormat, "duplicate document id in segment: " + id);
        }
        index.doc_ids_.push_back(std::move(id));
        index.doc_lengths_.push_back(length);
        total += length;
    }
    index.avg_doc_length_ = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
    const auto term_count = binary::get<std::uint64_t>(in);
    for (std::uint64_t t = 0; t < term_count; ++t) {
        auto term = binary::get_string(in);
        const auto count = binary::get<std::uint32_t>(in);
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            Posting p;
            p.doc = binary::get<std::uint32_t>(in);
            p.tf = binary::get<std::uint32_t>(in);
            if (p.doc >= n || (!list.empty() && p.doc <= list.back().doc)) {
                throw Error(Errc::IndexFormat, "corrupt posting list for term " + term);
            }
            list.push_back(p);
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    return index;
}

}  // namespace trialmatch
