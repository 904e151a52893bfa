#pragma once

#include "ragforge/error.hpp"
#include "ragforge/llm.hpp"
#include "ragforge/prompt.hpp"
#include "ragforge/retriever.hpp"
#include "ragforge/text.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ragforge {

enum class PromptProfile { CustomOnly, Condensed };

inline const char* to_string(PromptProfile p) { return p == PromptProfile::CustomOnly ? "custom" : "condensed"; }

inline PromptProfile parse_prompt_profile(const std::string& s) {
    if (s == "custom") {
        return PromptProfile::CustomOnly;
    }
    if (s == "condensed") {
        return PromptProfile::Condensed;
    }
    throw ValidationError("unknown prompt profile '" + s + "' (expected custom|condensed)");
}

struct GenerationConfig {
    double temperature = 0.0;
    std::optional<size_t> max_new_tokens;
    PromptProfile prompt_profile = PromptProfile::Condensed;
    bool deployment_prompt = false;
    size_t k = 4;

    GenerationParams params() const { return {temperature, max_new_tokens}; }

    void validate() const {
        if (!(temperature >= 0.0)) {
            throw ValidationError("temperature must be >= 0");
        }
        if (max_new_tokens && *max_new_tokens == 0) {
            throw ValidationError("max_new_tokens must be positive when set");
        }
        if (k == 0) {
            throw ValidationError("k must be at least 1");
        }
    }

    /// Reads the keys prompt_profile, deployment_prompt, temperature,
    /// max_new_tokens and k; absent keys keep their defaults.
    static GenerationConfig from_json(const nlohmann::json& j) {
        GenerationConfig cfg;
        if (j.contains("prompt_profile")) {
            cfg.prompt_profile = parse_prompt_profile(j["prompt_profile"].get<std::string>());
        }
        cfg.deployment_prompt = j.value("deployment_prompt", cfg.deployment_prompt);
        cfg.temperature = j.value("temperature", cfg.temperature);
        if (j.contains("max_new_tokens") && !j["max_new_tokens"].is_null()) {
            const auto v = j["max_new_tokens"].get<int64_t>();
            if (v <= 0) {
                throw ValidationError("max_new_tokens must be positive when set");
            }
            cfg.max_new_tokens = static_cast<size_t>(v);
        }
        if (j.contains("k")) {
            const auto v = j["k"].get<int64_t>();
            if (v <= 0) {
                throw ValidationError("k must be at least 1");
            }
            cfg.k = static_cast<size_t>(v);
        }
        cfg.validate();
        return cfg;
    }

    nlohmann::json to_json() const {
        return {{"prompt_profile", to_string(prompt_profile)},
                {"deployment_prompt", deployment_prompt},
                {"temperature", temperature},
                {"max_new_tokens", max_new_tokens ? nlohmann::json(*max_new_tokens) : nlohmann::json(nullptr)},
                {"k", k}};
    }
};

struct ChatTurn {
    std::string question;
    std::string answer;
    std::vector<std::string> retrieved_refs;
    std::vector<std::string> source_doc_ids;
    int64_t asked_at_ms = 0;
    int64_t answered_at_ms = 0;

    friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

inline void to_json(nlohmann::json& j, const ChatTurn& t) {
    j = nlohmann::json{{"question", t.question},           {"answer", t.answer},
                       {"retrieved", t.retrieved_refs},     {"sources", t.source_doc_ids},
                       {"asked_at_ms", t.asked_at_ms},      {"answered_at_ms", t.answered_at_ms}};
}

inline void from_json(const nlohmann::json& j, ChatTurn& t) {
    t.question = j.at("question").get<std::string>();
    t.answer = j.at("answer").get<std::string>();
    t.retrieved_refs = j.value("retrieved", std::vector<std::string>{});
    t.source_doc_ids = j.value("sources", std::vector<std::string>{});
    t.asked_at_ms = j.value("asked_at_ms", int64_t{0});
    t.answered_at_ms = j.value("answered_at_ms", int64_t{0});
}

/// Conversation state. Turns are append-only.
class ChatSession {
public:
    explicit ChatSession(std::string id = {}) : id_(std::move(id)) {}

    const std::string& id() const { return id_; }
    const std::vector<ChatTurn>& turns() const { return turns_; }
    bool empty() const { return turns_.empty(); }
    size_t size() const { return turns_.size(); }

    void append(ChatTurn turn) { turns_.push_back(std::move(turn)); }

    friend bool operator==(const ChatSession&, const ChatSession&) = default;

private:
    std::string id_;
    std::vector<ChatTurn> turns_;
};

/// "Utente: …\nAssistente: …" per turn, turns separated by a newline.
inline std::string serialize_history(const ChatSession& session) {
    std::string out;
    for (const auto& turn : session.turns()) {
        if (!out.empty()) {
            out += '\n';
        }
        out += prompts::kUserLabel + turn.question + '\n' + prompts::kAssistantLabel + turn.answer;
    }
    return out;
}

/// Rewrites a follow-up into a standalone question. No provider call when the
/// history is empty.
inline std::string condense(const ChatSession& history, const std::string& question, LLMProvider& llm,
                            const GenerationParams& params = {}, const PromptTemplate& tmpl = PromptSet::standard().condense) {
    if (trim(question).empty()) {
        throw ValidationError("question must not be empty");
    }
    if (history.empty()) {
        return question;
    }
    const std::string prompt = tmpl.render({{"chat_history", serialize_history(history)}, {"question", question}});
    std::string rewritten;
    try {
        rewritten = llm.generate(prompt, params);
    } catch (const ProviderError& e) {
        throw ProviderError("session " + history.id() + ": condensation failed: " + e.what());
    }
    return std::string(trim(rewritten));
}

inline int64_t system_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct AnswerResult {
    std::string answer;
    std::string retrieval_query;
    std::vector<RetrievedChunk> retrieved;
    ChatTurn turn;
};

/// The conversational pipeline: optional condensation, retrieval, one answer
/// generation. Holds no per-session state; callers serialize access to a session.
class RagEngine {
public:
    using Clock = std::function<int64_t()>;
    using EventSink = std::function<void(const std::string&)>;

    RagEngine(std::shared_ptr<const Retriever> retriever, std::shared_ptr<LLMProvider> llm, GenerationConfig cfg = {},
              Clock clock = system_clock_ms, EventSink events = {})
        : retriever_(std::move(retriever)),
          llm_(std::move(llm)),
          cfg_(cfg),
          prompts_(PromptSet::for_profile(cfg.deployment_prompt)),
          clock_(std::move(clock)),
          events_(std::move(events)) {
        cfg_.validate();
    }

    const GenerationConfig& config() const { return cfg_; }
    const PromptSet& prompt_set() const { return prompts_; }
    LLMProvider& llm() const { return *llm_; }

    /// Computes the next turn without touching the session.
    AnswerResult respond(const ChatSession& session, const std::string& question) const {
        if (trim(question).empty()) {
            throw ValidationError("question must not be empty");
        }
        const int64_t asked = clock_();
        const auto params = cfg_.params();

        std::string query = question;
        std::string question_slot = question;
        if (cfg_.prompt_profile == PromptProfile::Condensed) {
            query = condense(session, question, *llm_, params, prompts_.condense);
            if (query.empty()) {
                query = question;
            }
            question_slot = query;
        } else if (!session.empty()) {
            question_slot = serialize_history(session) + '\n' + prompts::kUserLabel + question;
        }

        auto retrieved = retriever_->retrieve(query, cfg_.k);
        if (retrieved.empty()) {
            emit("session " + session.id() + ": retrieval returned no context; answering with empty context");
        }
        std::vector<std::string> texts;
        for (const auto& r : retrieved) {
            texts.push_back(r.text);
        }
        const std::string prompt =
            prompts_.custom.render({{"question", question_slot}, {"context", join_context(texts)}});

        std::string answer;
        try {
            answer = llm_->generate(prompt, params);
        } catch (const ProviderError& e) {
            throw ProviderError("session " + session.id() + ": generation failed: " + e.what());
        }

        AnswerResult result;
        result.answer = answer;
        result.retrieval_query = query;
        result.turn.question = question;
        result.turn.answer = answer;
        for (const auto& r : retrieved) {
            result.turn.retrieved_refs.push_back(r.ref);
            if (std::find(result.turn.source_doc_ids.begin(), result.turn.source_doc_ids.end(), r.doc_id) ==
                result.turn.source_doc_ids.end()) {
                result.turn.source_doc_ids.push_back(r.doc_id);
            }
        }
        result.turn.asked_at_ms = asked;
        result.turn.answered_at_ms = clock_();
        result.retrieved = std::move(retrieved);
        return result;
    }

    /// respond() and append the turn to the session.
    AnswerResult answer(ChatSession& session, const std::string& question) const {
        auto result = respond(session, question);
        session.append(result.turn);
        return result;
    }

private:
    void emit(const std::string& event) const {
        if (events_) {
            events_(event);
        }
    }

    std::shared_ptr<const Retriever> retriever_;
    std::shared_ptr<LLMProvider> llm_;
    GenerationConfig cfg_;
    PromptSet prompts_;
    Clock clock_;
    EventSink events_;
};

} // namespace ragforge
