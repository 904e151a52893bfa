#pragma once

#include "ragforge/chunker.hpp"
#include "ragforge/corpus.hpp"
#include "ragforge/embedding.hpp"
#include "ragforge/vector_index.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ragforge {

struct RetrievedChunk {
    std::string ref;
    std::string doc_id;
    std::string text;
    double similarity = 0.0;

    friend bool operator==(const RetrievedChunk&, const RetrievedChunk&) = default;
};

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<RetrievedChunk> retrieve(const std::string& query, size_t k) const = 0;
};

inline std::vector<Chunk> chunk(const RawDocument& doc, const ChunkParams& params = {}) {
    return chunk_text(doc.doc_id, doc.text, params);
}

inline void to_json(nlohmann::json& j, const Chunk& c) {
    j = nlohmann::json{{"ref", c.ref()},
                       {"doc_id", c.doc_id},
                       {"seq", c.seq},
                       {"token_start", c.token_start},
                       {"token_end", c.token_end},
                       {"text", c.text}};
}

inline void from_json(const nlohmann::json& j, Chunk& c) {
    c.doc_id = j.at("doc_id").get<std::string>();
    c.seq = j.at("seq").get<size_t>();
    c.token_start = j.at("token_start").get<size_t>();
    c.token_end = j.at("token_end").get<size_t>();
    c.text = j.at("text").get<std::string>();
}

/// Chunk texts keyed by ref; persisted next to the index as "<index>.chunks.jsonl".
class ChunkStore {
public:
    void add(Chunk c) {
        auto ref = c.ref();
        if (!by_ref_.emplace(ref, chunks_.size()).second) {
            throw ValidationError("duplicate chunk ref: " + ref);
        }
        chunks_.push_back(std::move(c));
    }

    const Chunk* find(const std::string& ref) const {
        auto it = by_ref_.find(ref);
        return it == by_ref_.end() ? nullptr : &chunks_[it->second];
    }

    const std::vector<Chunk>& chunks() const { return chunks_; }
    size_t size() const { return chunks_.size(); }

    void save(const std::filesystem::path& path) const { io::atomic_write(path, format_records(chunks_)); }

    static ChunkStore load(const std::filesystem::path& path) {
        ChunkStore store;
        for (auto& c : load_records<Chunk>(path)) {
            store.add(std::move(c));
        }
        return store;
    }

    static std::filesystem::path sidecar_path(const std::filesystem::path& index_path) {
        auto p = index_path;
        p += ".chunks.jsonl";
        return p;
    }

private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, size_t> by_ref_;
};

struct BuiltIndex {
    VectorIndex index;
    ChunkStore store;
};

/// Chunks every document and embeds the chunks in batches of `batch_size`.
inline BuiltIndex build_index(const std::vector<RawDocument>& docs, EmbeddingProvider& embedder,
                              const ChunkParams& params = {}, size_t batch_size = 64) {
    BuiltIndex built{VectorIndex(embedder.dim()), {}};
    std::vector<Chunk> pending;
    auto flush = [&] {
        std::vector<std::string> texts;
        texts.reserve(pending.size());
        for (const auto& c : pending) {
            texts.push_back(c.text);
        }
        const auto vectors = embedder.embed(texts);
        if (vectors.size() != pending.size()) {
            throw ProviderError(embedder.name() + ": returned " + std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(pending.size()) + " texts");
        }
        for (size_t i = 0; i < pending.size(); ++i) {
            built.index.add(pending[i].ref(), vectors[i]);
            built.store.add(std::move(pending[i]));
        }
        pending.clear();
    };
    for (const auto& doc : docs) {
        for (auto& c : chunk(doc, params)) {
            pending.push_back(std::move(c));
            if (pending.size() >= batch_size) {
                flush();
            }
        }
    }
    if (!pending.empty()) {
        flush();
    }
    return built;
}

/// Embeds the query and searches the index. Not thread-safe only if the
/// embedder is not; the index and store are read-only.
class VectorRetriever final : public Retriever {
public:
    VectorRetriever(std::shared_ptr<const VectorIndex> index, std::shared_ptr<const ChunkStore> store,
                    std::shared_ptr<EmbeddingProvider> embedder)
        : index_(std::move(index)), store_(std::move(store)), embedder_(std::move(embedder)) {
        if (embedder_->dim() != index_->dim()) {
            throw ValidationError("embedder dimension " + std::to_string(embedder_->dim()) +
                                  " does not match index dimension " + std::to_string(index_->dim()));
        }
    }

    std::vector<RetrievedChunk> retrieve(const std::string& query, size_t k) const override {
        if (index_->empty()) {
            return {};
        }
        const auto q = embedder_->embed_one(query);
        std::vector<RetrievedChunk> out;
        for (const auto& hit : index_->search(q, k)) {
            out.push_back(resolve(hit));
        }
        return out;
    }

    /// Like retrieve(), but keeps only the best chunk of each parent document,
    /// walking down the ranking until `k` distinct documents are found.
    std::vector<RetrievedChunk> retrieve_documents(const std::string& query, size_t k) const {
        if (index_->empty()) {
            return {};
        }
        const auto q = embedder_->embed_one(query);
        std::vector<RetrievedChunk> out;
        std::unordered_set<std::string> seen;
        for (const auto& hit : index_->rank_all(q)) {
            auto r = resolve(hit);
            if (seen.insert(r.doc_id).second) {
                out.push_back(std::move(r));
                if (out.size() == k) {
                    break;
                }
            }
        }
        return out;
    }

    const VectorIndex& index() const { return *index_; }

private:
    RetrievedChunk resolve(const SearchHit& hit) const {
        const Chunk* c = store_->find(hit.id);
        if (c == nullptr) {
            throw NotFoundError("chunk store has no entry for index id " + hit.id);
        }
        return {hit.id, c->doc_id, c->text, hit.similarity};
    }

    std::shared_ptr<const VectorIndex> index_;
    std::shared_ptr<const ChunkStore> store_;
    std::shared_ptr<EmbeddingProvider> embedder_;
};

} // namespace ragforge
