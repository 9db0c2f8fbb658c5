#pragma once

// Random eligibility blocks with a record of the text they must keep.

#include <random>
#include <string>
#include <vector>

namespace seggen {

struct GeneratedBlock {
    std::string text;
    std::string expected_chars;  // every non-whitespace character outside markers, in order
};

inline GeneratedBlock random_block(std::mt19937_64& rng) {
    static const std::vector<std::string> words{"age",     "years",   "prior", "therapy", "her2",   "ecog",
                                                "status",  "18",      "≥",     "disease", "breast", "cancer",
                                                "no",      "active",  "mg/kg", "1.5",     "women",  "consent",
                                                "adequate", "function", "(anc)", "within",  "normal", "limits."};
    static const std::vector<std::string> markers{"1.", "2)", "10.", "a.", "b)", "-", "*", "•", "→", ""};
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

    GeneratedBlock b;
    const std::string eol = pick(4) == 0 ? "\r\n" : "\n";
    const std::size_t items = pick(10);
    for (std::size_t i = 0; i < items; ++i) {
        const std::size_t indent = pick(3) * 2 + (pick(5) == 0 ? 1 : 0);
        std::string line(indent, ' ');
        if (pick(6) == 0) line = std::string(pick(2) + 1, '\t');
        const auto& m = markers[pick(markers.size())];
        if (!m.empty()) line += m + " ";
        const std::size_t n = pick(7) + 1;
        for (std::size_t w = 0; w < n; ++w) {
            const auto& word = words[pick(words.size())];
            line += (w ? " " : "") + word;
            b.expected_chars += word;
        }
        b.text += line + eol;
        if (pick(4) == 0) {
            // wrapped continuation with a hanging indent
            std::string cont(indent + 3, ' ');
            const auto& word = words[pick(words.size() - 1)];
            cont += word + " continued";
            b.expected_chars += word + "continued";
            b.text += cont + eol;
        }
        if (pick(5) == 0) b.text += eol;
    }
    return b;
}

inline std::string strip_spaces(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out.push_back(c);
    }
    return out;
}

}  // namespace seggen

