#pragma once

#include "ragforge/error.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

/// Byte range [begin, end) of one token in its source text.
struct TokenSpan {
    size_t begin = 0;
    size_t end = 0;

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

constexpr bool is_token_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// A token is a maximal run of non-whitespace bytes. Only ASCII whitespace
/// separates tokens; multi-byte UTF-8 sequences never split.
inline std::vector<TokenSpan> tokenize(std::string_view text) {
    std::vector<TokenSpan> spans;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        while (i < n && is_token_space(text[i])) {
            ++i;
        }
        if (i == n) {
            break;
        }
        const size_t begin = i;
        while (i < n && !is_token_space(text[i])) {
            ++i;
        }
        spans.push_back({begin, i});
    }
    return spans;
}

inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    for (const auto& span : tokenize(text)) {
        words.emplace_back(text.substr(span.begin, span.end - span.begin));
    }
    return words;
}

struct Chunk {
    std::string doc_id;
    size_t seq = 0;
    size_t token_start = 0;
    size_t token_end = 0;
    std::string text;

    /// Index key: "<doc_id>#<seq>".
    std::string ref() const { return doc_id + "#" + std::to_string(seq); }

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Recovers the parent document id from a chunk ref.
inline std::string parent_doc_id(std::string_view chunk_ref) {
    const auto hash = chunk_ref.rfind('#');
    return std::string(hash == std::string_view::npos ? chunk_ref : chunk_ref.substr(0, hash));
}

struct ChunkParams {
    size_t chunk_size = 1000;
    size_t overlap = 50;

    size_t stride() const { return chunk_size - overlap; }

    void validate() const {
        if (chunk_size == 0) {
            throw ValidationError("chunk_size must be positive");
        }
        if (overlap >= chunk_size) {
            throw ValidationError("overlap (" + std::to_string(overlap) + ") must be smaller than chunk_size (" +
                                  std::to_string(chunk_size) + ")");
        }
    }
};

/// Closed-form number of windows for `token_count` tokens.
inline size_t expected_chunk_count(size_t token_count, const ChunkParams& params) {
    params.validate();
    if (token_count == 0) {
        return 0;
    }
    if (token_count <= params.chunk_size) {
        return 1;
    }
    const size_t rest = token_count - params.chunk_size;
    const size_t stride = params.stride();
    return 1 + (rest + stride - 1) / stride;
}

/// Token windows [start, end) covering [0, token_count).
inline std::vector<std::pair<size_t, size_t>> window_bounds(size_t token_count, const ChunkParams& params) {
    const size_t count = expected_chunk_count(token_count, params);
    std::vector<std::pair<size_t, size_t>> windows;
    windows.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const size_t start = i * params.stride();
        windows.emplace_back(start, std::min(start + params.chunk_size, token_count));
    }
    return windows;
}

/// Sliding-window chunking. Chunk text is the byte slice of `text` from the
/// first token's start to the last token's end, so inner whitespace survives.
inline std::vector<Chunk> chunk_text(const std::string& doc_id, std::string_view text, const ChunkParams& params = {}) {
    params.validate();
    const auto tokens = tokenize(text);
    std::vector<Chunk> chunks;
    size_t seq = 0;
    for (const auto& [start, end] : window_bounds(tokens.size(), params)) {
        const size_t byte_begin = tokens[start].begin;
        const size_t byte_end = tokens[end - 1].end;
        chunks.push_back({doc_id, seq++, start, end, std::string(text.substr(byte_begin, byte_end - byte_begin))});
    }
    return chunks;
}

} // namespace ragforge
