#pragma once

#include "ragforge/chunker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

namespace detail {

inline std::map<std::vector<std::string_view>, size_t> ngram_counts(const std::vector<std::string_view>& tokens,
                                                                    size_t n) {
    std::map<std::vector<std::string_view>, size_t> counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string_view>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                               tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

inline std::vector<std::string_view> token_views(std::string_view text) {
    std::vector<std::string_view> out;
    for (const auto& span : tokenize(text)) {
        out.push_back(text.substr(span.begin, span.end - span.begin));
    }
    return out;
}

} // namespace detail

/// Sentence-level BLEU over whitespace tokens with uniform weights and no
/// smoothing: a zero precision at any order makes the score exactly 0.
inline double bleu(std::string_view candidate, std::string_view reference, size_t max_n = 4) {
    const auto cand = detail::token_views(candidate);
    const auto ref = detail::token_views(reference);
    if (cand.empty() || ref.empty() || max_n == 0) {
        return 0.0;
    }
    double log_sum = 0.0;
    for (size_t n = 1; n <= max_n; ++n) {
        const auto cand_counts = detail::ngram_counts(cand, n);
        const auto ref_counts = detail::ngram_counts(ref, n);
        size_t clipped = 0, total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) {
                clipped += std::min(count, it->second);
            }
        }
        if (clipped == 0) {
            return 0.0;
        }
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(ref.size());
    const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
    return brevity * std::exp(log_sum / static_cast<double>(max_n));
}

struct RougeL {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

/// Length of the longest common subsequence, two-row dynamic programme.
template <typename T>
size_t lcs_length(const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// ROUGE-L with the balanced F-measure (beta = 1).
inline RougeL rouge_l(std::string_view candidate, std::string_view reference) {
    const auto cand = detail::token_views(candidate);
    const auto ref = detail::token_views(reference);
    if (cand.empty() || ref.empty()) {
        return {};
    }
    const double lcs = static_cast<double>(lcs_length(cand, ref));
    RougeL out;
    out.precision = lcs / static_cast<double>(cand.size());
    out.recall = lcs / static_cast<double>(ref.size());
    const double denom = out.precision + out.recall;
    out.f = denom == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / denom;
    return out;
}

} // namespace ragforge
