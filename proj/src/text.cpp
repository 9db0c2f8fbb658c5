#include "trialmatch/text.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>

namespace trialmatch::text {

namespace {

bool is_ascii_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

constexpr std::string_view kStopwords[] = {
    "a",     "about", "after", "all",   "an",    "and",   "any",   "are",   "as",
    "at",    "be",    "been",  "before", "but",  "by",    "can",   "did",   "do",
    "does",  "for",   "from",  "had",   "has",   "have",  "he",    "her",   "his",
    "if",    "in",    "into",  "is",    "it",    "its",   "may",   "must",  "no",
    "not",   "of",    "on",    "or",    "other", "she",   "should", "such", "than",
    "that",  "the",   "their", "there", "these", "they",  "this",  "those", "to",
    "under", "was",   "were",  "which", "while", "who",   "will",  "with",  "within",
    "without"};

}  // namespace

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = lower(static_cast<unsigned char>(c));
    return out;
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string clean_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto c = static_cast<unsigned char>(raw[i]);
        // U+00A0 no-break space
        if (c == 0xC2 && i + 1 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0xA0) {
            pending_space = true;
            ++i;
            continue;
        }
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (c < 0x20 || c == 0x7F) continue;
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(lower(c));
    }
    return out;
}

std::vector<std::string> lexical_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    const auto n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_ascii_alnum(c)) {
            current.push_back(lower(c));
            continue;
        }
        if ((c == '-' || c == '.') && !current.empty() && i + 1 < n &&
            is_ascii_alnum(static_cast<unsigned char>(text[i + 1]))) {
            current.push_back(static_cast<char>(c));
            continue;
        }
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<WordSpan> word_spans(std::string_view text) {
    std::vector<WordSpan> spans;
    std::size_t i = 0;
    const auto n = text.size();
    auto is_word = [](unsigned char c) { return is_ascii_alnum(c) || c >= 0x80; };
    while (i < n) {
        if (!is_word(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        WordSpan span;
        span.begin = i;
        while (i < n && is_word(static_cast<unsigned char>(text[i]))) {
            span.norm.push_back(lower(static_cast<unsigned char>(text[i])));
            ++i;
        }
        span.end = i;
        spans.push_back(std::move(span));
    }
    return spans;
}

std::string surface_key(std::string_view surface) {
    std::string key;
    for (const auto& w : word_spans(surface)) {
        if (!key.empty()) key.push_back(' ');
        key += w.norm;
    }
    return key;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    auto flush = [&](std::size_t b, std::size_t e) {
        auto s = trim(text.substr(b, e - b));
        if (!s.empty()) sentences.emplace_back(s);
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n' || c == '\r') {
            flush(start, i);
            start = i + 1;
        } else if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() &&
                   is_space(static_cast<unsigned char>(text[i + 1]))) {
            flush(start, i + 1);
            start = i + 1;
        }
    }
    if (start < text.size()) flush(start, text.size());
    return sentences;
}

bool is_stopword(std::string_view lowered_token) {
    return std::find(std::begin(kStopwords), std::end(kStopwords), lowered_token) != std::end(kStopwords);
}

std::vector<std::string> content_tokens(std::string_view text) {
    auto tokens = lexical_tokens(text);
    std::erase_if(tokens, [](const std::string& t) { return t.size() < 2 || is_stopword(t); });
    return tokens;
}

}  // namespace trialmatch::text
