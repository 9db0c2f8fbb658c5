#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace trialmatch {

enum class IndexLevel { Trial, Criterion };

std::string_view to_string(IndexLevel level);

using IdFilter = std::unordered_set<std::string>;

struct LexicalDocument {
    std::string id;
    std::string text;
    std::vector<std::string> enrichment_terms;  // entity surfaces and synonyms
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredDoc {
    std::string id;
    double score = 0.0;
    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

struct Posting {
    std::uint32_t doc = 0;  // internal document number
    std::uint32_t tf = 0;
    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Okapi BM25 over an in-memory inverted index. The idf is the non-negative
/// ln(1 + (N - df + 0.5) / (df + 0.5)). Immutable once built.
class LexicalIndex {
public:
    LexicalIndex() = default;

    /// Text tokens count normally; the tokens of the enrichment terms add
    /// tf 1 each (deduplicated per document). Throws DuplicateDocId.
    static LexicalIndex build(std::span<const LexicalDocument> documents, IndexLevel level, Bm25Params params = {});

    /// Throws UnknownDocId.
    double bm25_score(std::span<const std::string> query_terms, std::string_view doc_id) const;

    /// Exact top-k over documents matching at least one query term, ties by
    /// ascending doc id. `allowed` restricts the candidate documents.
    std::vector<ScoredDoc> topk(std::span<const std::string> query_terms, std::size_t k,
                                const IdFilter* allowed = nullptr) const;

    IndexLevel level() const { return level_; }
    const Bm25Params& params() const { return params_; }
    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    std::uint32_t doc_length(std::string_view doc_id) const;
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<Posting>& postings(const std::string& term) const;
    std::size_t term_count() const { return postings_.size(); }
    double idf(std::size_t df) const;

    void save(std::ostream& out) const;
    static LexicalIndex load(std::istream& in);

private:
    double term_score(double idf, std::uint32_t tf, std::uint32_t doc_length) const;

    IndexLevel level_ = IndexLevel::Trial;
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> doc_number_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_doc_length_ = 0.0;
};

}  // namespace trialmatch
