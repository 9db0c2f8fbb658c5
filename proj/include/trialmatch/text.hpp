#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace trialmatch::text {

/// Lowercases ASCII, strips control characters, collapses whitespace runs to
/// a single space and trims both ends. UTF-8 sequences pass through untouched.
std::string clean_text(std::string_view raw);

/// Lexical tokens for BM25 and the mock embedder: lowercase alphanumeric runs.
/// A '-' or '.' survives only between two alphanumerics ("her2-positive",
/// "1.5"). Non-ASCII bytes are separators.
std::vector<std::string> lexical_tokens(std::string_view text);

/// A word inside a source string, used by the dictionary tagger. Hyphens and
/// all ASCII punctuation split words; UTF-8 bytes are word characters.
struct WordSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string norm;  // lowercased
};

std::vector<WordSpan> word_spans(std::string_view text);

/// Canonical lookup key for a surface form: word_spans joined by one space.
std::string surface_key(std::string_view surface);

/// Narrative sentence split: line breaks, and [.!?] followed by whitespace.
/// Returned sentences are trimmed and keep their terminal punctuation.
std::vector<std::string> split_sentences(std::string_view text);

bool is_stopword(std::string_view lowered_token);

/// lexical_tokens minus stopwords and single characters.
std::vector<std::string> content_tokens(std::string_view text);

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s);

}  // namespace trialmatch::text
