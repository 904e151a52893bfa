#include "ragforge/chunker.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace ragforge;

namespace {

/// Independent oracle: step a window along the token axis until it reaches the end.
std::vector<std::pair<size_t, size_t>> enumerate_windows(size_t tokens, size_t size, size_t overlap) {
    std::vector<std::pair<size_t, size_t>> out;
    size_t start = 0;
    while (start < tokens) {
        const size_t end = std::min(start + size, tokens);
        out.emplace_back(start, end);
        if (end == tokens) {
            break;
        }
        start += size - overlap;
    }
    return out;
}

std::vector<std::string> naive_split(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) {
        words.push_back(w);
    }
    return words;
}

std::string words_text(size_t n) {
    std::string s;
    for (size_t i = 0; i < n; ++i) {
        s += "w" + std::to_string(i) + (i % 7 == 6 ? "\n" : " ");
    }
    return s;
}

} // namespace

TEST(Tokenize, EmptyText) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, MixedWhitespace) {
    const auto spans = tokenize("a  b\nc");
    ASSERT_EQ(spans.size(), 3u);
    EXPECT_EQ(spans[0], (TokenSpan{0, 1}));
    EXPECT_EQ(spans[1], (TokenSpan{3, 4}));
    EXPECT_EQ(spans[2], (TokenSpan{5, 6}));
}

TEST(Tokenize, Utf8StaysWhole) {
    const auto words = tokenize_words("Università è  qui");
    ASSERT_EQ(words.size(), 3u);
    EXPECT_EQ(words[0], "Università");
    EXPECT_EQ(words[1], "è");
}

TEST(Tokenize, MatchesNaiveSplitOnLongDocument) {
    std::mt19937 rng(7);
    const char alphabet[] = "abcdefghij  \n\t.,";
    std::string text;
    while (text.size() < 10000) {
        text.push_back(alphabet[rng() % (sizeof(alphabet) - 1)]);
    }
    EXPECT_EQ(tokenize_words(text), naive_split(text));
}

TEST(Chunk, SingleFullWindow) {
    const auto chunks = chunk_text("d", words_text(1000));
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].token_start, 0u);
    EXPECT_EQ(chunks[0].token_end, 1000u);
}

TEST(Chunk, TwoWindowsAt1950) {
    const auto chunks = chunk_text("d", words_text(1950));
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].token_end, 1000u);
    EXPECT_EQ(chunks[1].token_start, 950u);
    EXPECT_EQ(chunks[1].token_end, 1950u);
}

TEST(Chunk, ThreeWindowsAt2000) {
    const auto chunks = chunk_text("d", words_text(2000));
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[2].token_start, 1900u);
    EXPECT_EQ(chunks[2].token_end, 2000u);
    EXPECT_EQ(chunks[2].seq, 2u);
}

TEST(Chunk, EmptyDocument) { EXPECT_TRUE(chunk_text("d", "   \n").empty()); }

TEST(Chunk, RejectsOverlapNotBelowSize) {
    EXPECT_THROW(chunk_text("d", "a b c", {10, 10}), ValidationError);
    EXPECT_THROW(chunk_text("d", "a b c", {10, 12}), ValidationError);
}

TEST(Chunk, TextCoversTokenRange) {
    const std::string text = "uno due  tre\nquattro cinque sei";
    const auto chunks = chunk_text("doc", text, {4, 1});
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].text, "uno due  tre\nquattro");
    EXPECT_EQ(chunks[1].text, "quattro cinque sei");
    EXPECT_EQ(chunks[1].ref(), "doc#1");
    EXPECT_EQ(parent_doc_id(chunks[1].ref()), "doc");
}

TEST(ChunkProperty, ClosedFormMatchesEnumerationAndCovers) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t tokens = rng() % 10001;
        const size_t size = 1 + rng() % 1500;
        const size_t overlap = rng() % size;
        const ChunkParams params{size, overlap};
        const auto oracle = enumerate_windows(tokens, size, overlap);
        ASSERT_EQ(expected_chunk_count(tokens, params), oracle.size()) << tokens << " " << size << " " << overlap;
        const auto windows = window_bounds(tokens, params);
        ASSERT_EQ(windows, oracle);
        // coverage and fixed stride
        size_t covered = 0;
        for (size_t i = 0; i < windows.size(); ++i) {
            ASSERT_LE(windows[i].first, covered);
            ASSERT_LE(windows[i].second - windows[i].first, size);
            covered = std::max(covered, windows[i].second);
            if (i + 1 < windows.size()) {
                ASSERT_EQ(windows[i + 1].first, windows[i].first + params.stride());
            }
        }
        ASSERT_EQ(covered, tokens);
    }
}
