#pragma once

#include "ragforge/embedding.hpp"
#include "ragforge/error.hpp"
#include "ragforge/llm.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace ragforge {

/// Splits "http://host:port/prefix" into the origin httplib connects to and
/// the path prefix requests are appended to.
struct Endpoint {
    std::string origin;
    std::string prefix;

    static Endpoint parse(const std::string& url) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            throw ValidationError("endpoint URL needs a scheme: '" + url + "'");
        }
        const std::string scheme = url.substr(0, scheme_end);
        if (scheme != "http" && scheme != "https") {
            throw ValidationError("unsupported endpoint scheme '" + scheme + "'");
        }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (scheme == "https") {
            throw ValidationError("https endpoints need a build with RAGFORGE_WITH_OPENSSL=ON");
        }
#endif
        const auto path_start = url.find('/', scheme_end + 3);
        Endpoint e;
        e.origin = url.substr(0, path_start);
        if (e.origin.size() == scheme_end + 3) {
            throw ValidationError("endpoint URL has no host: '" + url + "'");
        }
        if (path_start != std::string::npos) {
            e.prefix = url.substr(path_start);
            while (!e.prefix.empty() && e.prefix.back() == '/') {
                e.prefix.pop_back();
            }
        }
        return e;
    }

    std::string path(const std::string& route) const { return prefix + route; }
};

/// Counting semaphore capping concurrent requests per provider.
class InFlightLimit {
public:
    explicit InFlightLimit(size_t cap) : cap_(cap) {
        if (cap_ == 0) {
            throw ValidationError("in-flight request cap must be positive");
        }
    }

    class Slot {
    public:
        explicit Slot(InFlightLimit& owner) : owner_(owner) { owner_.acquire(); }
        ~Slot() { owner_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        InFlightLimit& owner_;
    };

    size_t in_flight() const {
        std::lock_guard lock(mutex_);
        return active_;
    }
    size_t peak() const {
        std::lock_guard lock(mutex_);
        return peak_;
    }

private:
    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return active_ < cap_; });
        peak_ = std::max(peak_, ++active_);
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            --active_;
        }
        cv_.notify_one();
    }

    size_t cap_;
    size_t active_ = 0;
    size_t peak_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

struct RemoteConfig {
    std::string url;
    std::string key;
    std::string model;
    size_t max_in_flight = 4;
    std::chrono::seconds timeout{60};
    size_t retries = 2;
    std::chrono::milliseconds backoff{500};
};

inline std::string env_or(const char* name, std::string fallback = {}) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

/// POSTs JSON with bearer auth, retrying transport failures, 429 and 5xx.
class JsonClient {
public:
    explicit JsonClient(RemoteConfig config)
        : config_(std::move(config)), endpoint_(Endpoint::parse(config_.url)), limit_(config_.max_in_flight) {}

    nlohmann::json post(const std::string& route, const nlohmann::json& body, const std::string& who) {
        InFlightLimit::Slot slot(limit_);
        httplib::Client client(endpoint_.origin);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        httplib::Headers headers;
        if (!config_.key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.key);
        }
        const std::string payload = body.dump();
        std::string last_error;
        for (size_t attempt = 0; attempt <= config_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(config_.backoff * static_cast<int64_t>(1LL << (attempt - 1)));
            }
            auto res = client.Post(endpoint_.path(route), headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw ProviderError(who + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProviderError(who + ": malformed response body: " + e.what());
            }
        }
        throw ProviderError(who + ": " + last_error + " after " + std::to_string(config_.retries + 1) + " attempts");
    }

    const RemoteConfig& config() const { return config_; }
    const InFlightLimit& limit() const { return limit_; }

private:
    RemoteConfig config_;
    Endpoint endpoint_;
    InFlightLimit limit_;
};

/// Chat-completions client ("/chat/completions" under the configured URL).
class RemoteLLMProvider final : public LLMProvider {
public:
    explicit RemoteLLMProvider(RemoteConfig config) : client_(std::move(config)) {
        if (client_.config().model.empty()) {
            throw ValidationError("remote LLM provider needs a model name");
        }
    }

    /// Reads RAGFORGE_LLM_URL and RAGFORGE_LLM_KEY; the model comes from the
    /// argument or RAGFORGE_LLM_MODEL.
    static RemoteConfig config_from_env(const std::string& model = {}) {
        RemoteConfig c;
        c.url = env_or("RAGFORGE_LLM_URL");
        if (c.url.empty()) {
            throw ValidationError("RAGFORGE_LLM_URL is not set");
        }
        c.key = env_or("RAGFORGE_LLM_KEY");
        c.model = model.empty() ? env_or("RAGFORGE_LLM_MODEL", "gpt-3.5-turbo-0125") : model;
        return c;
    }

    std::string name() const override { return client_.config().model; }

    std::string generate(const std::string& prompt, const GenerationParams& params) override {
        nlohmann::json body{{"model", client_.config().model},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                            {"temperature", params.temperature}};
        if (params.max_new_tokens) {
            body["max_tokens"] = *params.max_new_tokens;
        }
        const auto reply = client_.post("/chat/completions", body, name());
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(name() + ": unexpected response shape: " + e.what());
        }
    }

    const JsonClient& client() const { return client_; }

private:
    JsonClient client_;
};

/// Embeddings client ("/embeddings" under the configured URL). The dimension
/// is whatever the model returns; it is probed once if not configured.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteConfig config, size_t dim = 0) : client_(std::move(config)), dim_(dim) {
        if (client_.config().model.empty()) {
            throw ValidationError("remote embedding provider needs a model name");
        }
    }

    static RemoteConfig config_from_env() {
        RemoteConfig c;
        c.url = env_or("RAGFORGE_EMBED_URL");
        if (c.url.empty()) {
            throw ValidationError("RAGFORGE_EMBED_URL is not set");
        }
        c.key = env_or("RAGFORGE_EMBED_KEY");
        c.model = env_or("RAGFORGE_EMBED_MODEL", "text-embedding-ada-002");
        return c;
    }

    std::string name() const override { return "remote:" + client_.config().model; }

    size_t dim() const override {
        std::lock_guard lock(dim_mutex_);
        if (dim_ == 0) {
            dim_ = request({"dimension probe"}).at(0).dim();
        }
        return dim_;
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) {
            return {};
        }
        auto out = request(texts);
        std::lock_guard lock(dim_mutex_);
        if (dim_ == 0) {
            dim_ = out.at(0).dim();
        }
        for (const auto& v : out) {
            if (v.dim() != dim_) {
                throw ProviderError(name() + ": got dimension " + std::to_string(v.dim()) + ", expected " +
                                    std::to_string(dim_));
            }
        }
        return out;
    }

private:
    std::vector<EmbeddingVector> request(const std::vector<std::string>& texts) const {
        const auto reply =
            client_.post("/embeddings", {{"model", client_.config().model}, {"input", texts}}, name());
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        try {
            const auto& data = reply.at("data");
            if (data.size() != texts.size()) {
                throw ProviderError(name() + ": asked for " + std::to_string(texts.size()) + " embeddings, got " +
                                    std::to_string(data.size()));
            }
            for (size_t i = 0; i < data.size(); ++i) {
                const size_t index = data[i].value("index", i);
                if (index >= texts.size() || seen[index]) {
                    throw ProviderError(name() + ": bad embedding index " + std::to_string(index));
                }
                seen[index] = true;
                out[index].values = data[i].at("embedding").get<std::vector<double>>();
                if (out[index].values.empty()) {
                    throw ProviderError(name() + ": empty embedding");
                }
                normalize(out[index].values);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(name() + ": unexpected response shape: " + e.what());
        }
        return out;
    }

    mutable JsonClient client_;
    mutable size_t dim_;
    mutable std::mutex dim_mutex_;
};

} // namespace ragforge
