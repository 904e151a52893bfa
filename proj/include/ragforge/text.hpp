#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

/// Splits after '.', '!' or '?' when followed by whitespace or end of text.
/// Abbreviations are not special-cased. Empty pieces are dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    size_t start = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') {
            continue;
        }
        const bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' ||
                              text[i + 1] == '\t' || text[i + 1] == '\r';
        if (!boundary) {
            continue;
        }
        auto piece = trim(text.substr(start, i + 1 - start));
        if (!piece.empty()) {
            sentences.emplace_back(piece);
        }
        start = i + 1;
    }
    if (start < text.size()) {
        auto piece = trim(text.substr(start));
        if (!piece.empty()) {
            sentences.emplace_back(piece);
        }
    }
    return sentences;
}

} // namespace ragforge
