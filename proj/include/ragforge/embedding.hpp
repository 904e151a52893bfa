#pragma once

#include "ragforge/chunker.hpp"
#include "ragforge/error.hpp"
#include "ragforge/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

/// Either the zero vector or unit L2 norm.
struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }

    double norm() const {
        double sum = 0.0;
        for (double v : values) {
            sum += v * v;
        }
        return std::sqrt(sum);
    }

    bool is_zero() const {
        for (double v : values) {
            if (v != 0.0) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Scales to unit norm in place; the zero vector stays zero.
inline void normalize(std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) {
        sum += v * v;
    }
    if (sum == 0.0) {
        return;
    }
    const double inv = 1.0 / std::sqrt(sum);
    for (double& v : values) {
        v *= inv;
    }
}

/// Cosine of two equal-length vectors; 0 when either is zero.
inline double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.values, b.values); }

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string name() const = 0;
    virtual size_t dim() const = 0;

    /// One vector per input text, same order. Must be safe to call concurrently.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;

    EmbeddingVector embed_one(const std::string& text) { return embed({text}).at(0); }
};

/// Signed feature hashing over whitespace tokens. Tokens are ASCII-lowercased
/// and stripped of surrounding ASCII punctuation before hashing with FNV-1a;
/// the low bits pick the bucket, the top bit picks the sign.
class LocalEmbedder final : public EmbeddingProvider {
public:
    static constexpr size_t kDefaultDim = 256;

    explicit LocalEmbedder(size_t dim = kDefaultDim) : dim_(dim) {
        if (dim_ == 0) {
            throw ValidationError("embedding dimension must be positive");
        }
    }

    std::string name() const override { return "local-hash-" + std::to_string(dim_); }
    size_t dim() const override { return dim_; }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            out.push_back(embed_text(text, dim_));
        }
        return out;
    }

    static std::string normalize_token(std::string_view token) {
        size_t begin = 0, end = token.size();
        auto punct = [](char c) {
            const auto u = static_cast<unsigned char>(c);
            return u < 0x80 && std::ispunct(u) != 0;
        };
        while (begin < end && punct(token[begin])) {
            ++begin;
        }
        while (end > begin && punct(token[end - 1])) {
            --end;
        }
        std::string out(token.substr(begin, end - begin));
        for (char& c : out) {
            if (c >= 'A' && c <= 'Z') {
                c = static_cast<char>(c - 'A' + 'a');
            }
        }
        return out;
    }

    struct Feature {
        size_t bucket;
        double sign;
    };

    /// Bucket and sign for an already-normalized token.
    static Feature feature(std::string_view normalized_token, size_t dim) {
        const uint64_t h = io::fnv1a64(normalized_token);
        return {static_cast<size_t>(h % dim), (h >> 63) != 0 ? -1.0 : 1.0};
    }

    static EmbeddingVector embed_text(std::string_view text, size_t dim) {
        std::vector<double> values(dim, 0.0);
        for (const auto& span : tokenize(text)) {
            const auto token = normalize_token(text.substr(span.begin, span.end - span.begin));
            if (token.empty()) {
                continue;
            }
            const auto f = feature(token, dim);
            values[f.bucket] += f.sign;
        }
        normalize(values);
        return {std::move(values)};
    }

private:
    size_t dim_;
};

} // namespace ragforge
