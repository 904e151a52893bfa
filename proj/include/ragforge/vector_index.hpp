#pragma once

#include "ragforge/embedding.hpp"
#include "ragforge/error.hpp"
#include "ragforge/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

namespace ragforge {

struct SearchHit {
    std::string id;
    size_t position = 0;  ///< insertion order
    double similarity = 0.0;

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Exact cosine top-k over a flat float store. Immutable once built; concurrent
/// searches need no coordination.
class VectorIndex {
public:
    static constexpr uint32_t kFormatVersion = 1;
    static constexpr char kMagic[4] = {'V', 'I', 'D', 'X'};

    explicit VectorIndex(size_t dim = LocalEmbedder::kDefaultDim) : dim_(dim) {
        if (dim_ == 0) {
            throw ValidationError("index dimension must be positive");
        }
    }

    size_t dim() const { return dim_; }
    size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::string& id(size_t position) const { return ids_.at(position); }
    const std::vector<std::string>& ids() const { return ids_; }

    std::span<const float> vector(size_t position) const {
        return std::span<const float>(data_).subspan(position * dim_, dim_);
    }

    void add(std::string id, std::span<const double> values) {
        check_dim(values.size());
        std::vector<float> narrowed(values.begin(), values.end());
        append(std::move(id), narrowed);
    }

    void add(std::string id, const EmbeddingVector& v) { add(std::move(id), std::span<const double>(v.values)); }

    void add_raw(std::string id, std::span<const float> values) {
        check_dim(values.size());
        append(std::move(id), values);
    }

    /// Similarity of the stored entry to `query`; 0 when either side is zero.
    double similarity(size_t position, std::span<const double> query, double query_norm) const {
        if (query_norm == 0.0 || norms_[position] == 0.0) {
            return 0.0;
        }
        const float* row = data_.data() + position * dim_;
        double dot = 0.0;
        for (size_t d = 0; d < dim_; ++d) {
            dot += query[d] * static_cast<double>(row[d]);
        }
        return std::clamp(dot / (query_norm * norms_[position]), -1.0, 1.0);
    }

    /// Top-k by cosine similarity, descending; ties go to the earlier insertion.
    std::vector<SearchHit> search(const EmbeddingVector& query, size_t k = 4) const {
        return ranked(query, k);
    }

    /// Full ranking of all entries.
    std::vector<SearchHit> rank_all(const EmbeddingVector& query) const { return ranked(query, size()); }

    friend bool operator==(const VectorIndex& a, const VectorIndex& b) {
        if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.data_.size() != b.data_.size()) {
            return false;
        }
        return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
    }

    // -- persistence -------------------------------------------------------

    std::string serialize() const {
        std::string out(kMagic, 4);
        put_u32(out, kFormatVersion);
        put_u32(out, static_cast<uint32_t>(dim_));
        put_u64(out, ids_.size());
        for (size_t i = 0; i < ids_.size(); ++i) {
            put_u32(out, static_cast<uint32_t>(ids_[i].size()));
            out += ids_[i];
            for (float f : vector(i)) {
                put_u32(out, std::bit_cast<uint32_t>(f));
            }
        }
        return out;
    }

    static VectorIndex deserialize(std::string_view bytes, const std::string& origin = "<memory>") {
        Reader r{bytes, 0, origin};
        if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
            throw FormatError(origin + ": bad magic bytes, not a VIDX index file");
        }
        r.pos = 4;
        const uint32_t version = r.u32("version");
        if (version != kFormatVersion) {
            throw FormatError(origin + ": unsupported index format version " + std::to_string(version) +
                              " (expected " + std::to_string(kFormatVersion) + ")");
        }
        const uint32_t dim = r.u32("dim");
        if (dim == 0) {
            throw FormatError(origin + ": index dimension is zero");
        }
        const uint64_t count = r.u64("entry count");
        VectorIndex index(dim);
        std::vector<float> row(dim);
        for (uint64_t e = 0; e < count; ++e) {
            const std::string where = "entry " + std::to_string(e);
            const uint32_t len = r.u32(where + " id length");
            std::string id(r.take(len, where + " id"));
            for (uint32_t d = 0; d < dim; ++d) {
                row[d] = std::bit_cast<float>(r.u32(where + " vector"));
            }
            index.add_raw(std::move(id), row);
        }
        if (r.pos != bytes.size()) {
            throw FormatError(origin + ": " + std::to_string(bytes.size() - r.pos) + " trailing bytes after " +
                              std::to_string(count) + " entries");
        }
        return index;
    }

    void save(const std::filesystem::path& destination) const { io::atomic_write(destination, serialize()); }

    static VectorIndex load(const std::filesystem::path& source) {
        return deserialize(io::read_file(source), source.string());
    }

private:
    struct Reader {
        std::string_view bytes;
        size_t pos;
        const std::string& origin;

        std::string_view take(size_t n, const std::string& what) {
            if (bytes.size() - pos < n) {
                throw FormatError(origin + ": truncated file while reading " + what);
            }
            auto view = bytes.substr(pos, n);
            pos += n;
            return view;
        }
        uint32_t u32(const std::string& what) {
            auto b = take(4, what);
            uint32_t v = 0;
            for (int i = 3; i >= 0; --i) {
                v = (v << 8) | static_cast<unsigned char>(b[static_cast<size_t>(i)]);
            }
            return v;
        }
        uint64_t u64(const std::string& what) {
            auto b = take(8, what);
            uint64_t v = 0;
            for (int i = 7; i >= 0; --i) {
                v = (v << 8) | static_cast<unsigned char>(b[static_cast<size_t>(i)]);
            }
            return v;
        }
    };

    static void put_u32(std::string& out, uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    static void put_u64(std::string& out, uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }

    void check_dim(size_t got) const {
        if (got != dim_) {
            throw ValidationError("dimension mismatch: index has " + std::to_string(dim_) + ", vector has " +
                                  std::to_string(got));
        }
    }

    void append(std::string id, std::span<const float> values) {
        if (!id_set_.insert(id).second) {
            throw ValidationError("duplicate index entry id: " + id);
        }
        double sum = 0.0;
        for (float f : values) {
            sum += static_cast<double>(f) * static_cast<double>(f);
        }
        norms_.push_back(std::sqrt(sum));
        data_.insert(data_.end(), values.begin(), values.end());
        ids_.push_back(std::move(id));
    }

    std::vector<SearchHit> ranked(const EmbeddingVector& query, size_t k) const {
        check_dim(query.dim());
        if (k == 0) {
            throw ValidationError("k must be at least 1");
        }
        const double qn = query.norm();
        std::vector<double> sims(size());
        for (size_t i = 0; i < size(); ++i) {
            sims[i] = similarity(i, query.values, qn);
        }
        std::vector<size_t> order(size());
        std::iota(order.begin(), order.end(), size_t{0});
        const size_t take = std::min(k, order.size());
        auto better = [&](size_t a, size_t b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
        std::vector<SearchHit> hits;
        hits.reserve(take);
        for (size_t i = 0; i < take; ++i) {
            hits.push_back({ids_[order[i]], order[i], sims[order[i]]});
        }
        return hits;
    }

    size_t dim_;
    std::vector<std::string> ids_;
    std::unordered_set<std::string> id_set_;
    std::vector<float> data_;
    std::vector<double> norms_;
};

} // namespace ragforge
