#pragma once

#include "ragforge/chunker.hpp"
#include "ragforge/error.hpp"
#include "ragforge/io.hpp"
#include "ragforge/text.hpp"

#include "json.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ragforge {

struct GenerationParams {
    double temperature = 0.0;
    std::optional<size_t> max_new_tokens;

    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

/// Text generation backend. Implementations must be safe to call concurrently.
class LLMProvider {
public:
    virtual ~LLMProvider() = default;

    virtual std::string name() const = 0;

    /// Throws ProviderError on backend failure.
    virtual std::string generate(const std::string& prompt, const GenerationParams& params) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct PromptMatcher {
    /// Empty needle matches every prompt.
    std::string needle;

    static PromptMatcher any() { return {}; }
    static PromptMatcher contains(std::string text) { return {std::move(text)}; }

    bool matches(const std::string& prompt) const { return needle.empty() || prompt.find(needle) != std::string::npos; }
};

struct ScriptEntry {
    PromptMatcher match;
    std::string response;
    /// Repeating entries are never consumed.
    bool repeat = false;
    /// When set, a matching call fails with `response` as the message.
    bool fail = false;
};

struct RecordedCall {
    std::string prompt;
    GenerationParams params;
    std::string response;
    bool failed = false;
};

/// Replays a script. Each call takes the first unconsumed entry whose matcher
/// accepts the prompt.
class MockProvider final : public LLMProvider {
public:
    explicit MockProvider(std::vector<ScriptEntry> script, std::string name = "mock")
        : name_(std::move(name)), script_(std::move(script)), consumed_(script_.size(), false) {
        if (script_.empty()) {
            throw ValidationError("mock provider script must not be empty");
        }
    }

    std::string name() const override { return name_; }

    std::string generate(const std::string& prompt, const GenerationParams& params) override {
        std::lock_guard lock(mutex_);
        bool any_left = false;
        for (size_t i = 0; i < script_.size(); ++i) {
            if (consumed_[i]) {
                continue;
            }
            any_left = true;
            const auto& entry = script_[i];
            if (!entry.match.matches(prompt)) {
                continue;
            }
            if (!entry.repeat) {
                consumed_[i] = true;
            }
            calls_.push_back({prompt, params, entry.response, entry.fail});
            if (entry.fail) {
                throw ProviderError(name_ + ": " + entry.response);
            }
            return entry.response;
        }
        calls_.push_back({prompt, params, {}, true});
        if (!any_left) {
            throw ProviderError(name_ + ": script exhausted after " + std::to_string(calls_.size() - 1) + " calls");
        }
        throw ProviderError(name_ + ": scripted gap, no entry matches prompt starting '" + prompt.substr(0, 60) + "'");
    }

    std::vector<RecordedCall> calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

    size_t call_count() const {
        std::lock_guard lock(mutex_);
        return calls_.size();
    }

    /// Loads a script file: one {"match", "response", "repeat", "fail"} object per line.
    static std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
        std::vector<ScriptEntry> script;
        const auto lines = io::read_records(path);
        for (size_t i = 0; i < lines.size(); ++i) {
            try {
                const auto j = nlohmann::json::parse(lines[i]);
                ScriptEntry entry;
                if (j.contains("match") && !j["match"].is_null()) {
                    entry.match = PromptMatcher::contains(j["match"].get<std::string>());
                }
                entry.response = j.at("response").get<std::string>();
                entry.repeat = j.value("repeat", false);
                entry.fail = j.value("fail", false);
                script.push_back(std::move(entry));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
            }
        }
        return script;
    }

private:
    std::string name_;
    std::vector<ScriptEntry> script_;
    mutable std::mutex mutex_;
    std::vector<bool> consumed_;
    std::vector<RecordedCall> calls_;
};

// ---------------------------------------------------------------------------
// Extractive offline provider

/// Deterministic offline stand-in for a chat model. It recognises the shipped
/// prompt layouts: a condensation prompt is answered with the follow-up question
/// itself; an answer prompt is answered with the leading sentences of its
/// document slot; anything else gets the fallback apology.
class ExtractiveProvider final : public LLMProvider {
public:
    static constexpr const char* kFallback =
        "Mi dispiace, non ho trovato informazioni utili. Consulta il sito web https://www.unipa.it/.";

    explicit ExtractiveProvider(size_t max_sentences = 2, std::string name = "extractive")
        : name_(std::move(name)), max_sentences_(max_sentences) {}

    std::string name() const override { return name_; }

    std::string generate(const std::string& prompt, const GenerationParams& params) override {
        std::string answer = respond(prompt);
        if (params.max_new_tokens) {
            answer = truncate_tokens(answer, *params.max_new_tokens);
        }
        return answer;
    }

private:
    std::string respond(const std::string& prompt) const {
        if (prompt.find("Domanda singola:") != std::string::npos) {
            const std::string marker = "Domanda succesiva: ";
            const auto at = prompt.rfind(marker);
            if (at != std::string::npos) {
                const auto begin = at + marker.size();
                const auto end = prompt.find('\n', begin);
                return std::string(trim(std::string_view(prompt).substr(begin, end == std::string::npos ? end : end - begin)));
            }
        }
        std::string_view context;
        bool found = false;
        for (const char* marker : {"Documenti: ", "Informazioni: "}) {
            const auto at = prompt.rfind(marker);
            if (at != std::string::npos) {
                context = std::string_view(prompt).substr(at + std::char_traits<char>::length(marker));
                found = true;
                break;
            }
        }
        if (!found) {
            const auto at = prompt.rfind("\n\nDomanda: ");
            if (at != std::string::npos) {
                context = std::string_view(prompt).substr(0, at);
            }
        }
        const auto sentences = split_sentences(context);
        if (sentences.empty()) {
            return kFallback;
        }
        std::string out;
        for (size_t i = 0; i < sentences.size() && i < max_sentences_; ++i) {
            if (!out.empty()) {
                out += ' ';
            }
            out += sentences[i];
        }
        return out;
    }

    static std::string truncate_tokens(const std::string& text, size_t limit) {
        const auto spans = tokenize(text);
        if (spans.size() <= limit) {
            return text;
        }
        return limit == 0 ? std::string{} : text.substr(0, spans[limit - 1].end);
    }

    std::string name_;
    size_t max_sentences_;
};

} // namespace ragforge
