#pragma once

#include "ragforge/embedding.hpp"
#include "ragforge/error.hpp"
#include "ragforge/llm.hpp"
#include "ragforge/text.hpp"

#include "json.hpp"

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace ragforge {

struct StatementClassification {
    size_t true_positive = 0;
    size_t false_positive = 0;
    size_t false_negative = 0;

    friend bool operator==(const StatementClassification&, const StatementClassification&) = default;
};

/// The model-mediated steps behind context relevancy, faithfulness and answer
/// correctness. Implementations throw ProviderError on failure.
class JudgeProvider {
public:
    virtual ~JudgeProvider() = default;

    virtual std::string name() const = 0;
    virtual std::set<size_t> relevant_sentences(const std::string& question,
                                                const std::vector<std::string>& sentences) = 0;
    virtual std::vector<std::string> decompose(const std::string& answer) = 0;
    virtual bool verify(const std::string& statement, const std::string& context) = 0;
    virtual StatementClassification classify(const std::vector<std::string>& answer_statements,
                                             const std::vector<std::string>& golden_statements) = 0;
};

/// Judge whose every step is a caller-supplied function; an unset step fails.
class ScriptedJudge final : public JudgeProvider {
public:
    std::function<std::set<size_t>(const std::string&, const std::vector<std::string>&)> on_relevant;
    std::function<std::vector<std::string>(const std::string&)> on_decompose;
    std::function<bool(const std::string&, const std::string&)> on_verify;
    std::function<StatementClassification(const std::vector<std::string>&, const std::vector<std::string>&)> on_classify;

private:
    template <typename F, typename... Args>
    static auto call(F& fn, const char* step, Args&&... args) {
        if (!fn) {
            throw ProviderError(std::string("scripted judge: step '") + step + "' not scripted");
        }
        return fn(std::forward<Args>(args)...);
    }

public:

    std::string name() const override { return "scripted"; }

    std::set<size_t> relevant_sentences(const std::string& q, const std::vector<std::string>& s) override {
        return call(on_relevant, "relevant_sentences", q, s);
    }
    std::vector<std::string> decompose(const std::string& answer) override {
        return call(on_decompose, "decompose", answer);
    }
    bool verify(const std::string& statement, const std::string& context) override {
        return call(on_verify, "verify", statement, context);
    }
    StatementClassification classify(const std::vector<std::string>& a, const std::vector<std::string>& g) override {
        return call(on_classify, "classify", a, g);
    }

};

/// Deterministic offline judge built on token overlap. Content words are
/// normalized tokens of at least four bytes.
class LexicalJudge final : public JudgeProvider {
public:
    explicit LexicalJudge(double support_threshold = 0.6, double match_threshold = 0.5)
        : support_threshold_(support_threshold), match_threshold_(match_threshold) {}

    std::string name() const override { return "lexical"; }

    static std::unordered_set<std::string> content_words(std::string_view text) {
        std::unordered_set<std::string> words;
        for (const auto& span : tokenize(text)) {
            auto w = LocalEmbedder::normalize_token(text.substr(span.begin, span.end - span.begin));
            if (w.size() >= 4) {
                words.insert(std::move(w));
            }
        }
        return words;
    }

    std::set<size_t> relevant_sentences(const std::string& question,
                                        const std::vector<std::string>& sentences) override {
        const auto q = content_words(question);
        std::set<size_t> out;
        for (size_t i = 0; i < sentences.size(); ++i) {
            for (const auto& w : content_words(sentences[i])) {
                if (q.contains(w)) {
                    out.insert(i);
                    break;
                }
            }
        }
        return out;
    }

    std::vector<std::string> decompose(const std::string& answer) override { return split_sentences(answer); }

    bool verify(const std::string& statement, const std::string& context) override {
        return coverage(content_words(statement), content_words(context)) >= support_threshold_;
    }

    StatementClassification classify(const std::vector<std::string>& answer_statements,
                                     const std::vector<std::string>& golden_statements) override {
        std::vector<std::unordered_set<std::string>> golden;
        for (const auto& g : golden_statements) {
            golden.push_back(content_words(g));
        }
        StatementClassification out;
        std::vector<bool> golden_hit(golden.size(), false);
        for (const auto& a : answer_statements) {
            const auto words = content_words(a);
            bool matched = false;
            for (size_t g = 0; g < golden.size(); ++g) {
                if (coverage(words, golden[g]) >= match_threshold_ && !words.empty()) {
                    matched = true;
                    golden_hit[g] = true;
                }
            }
            (matched ? out.true_positive : out.false_positive) += 1;
        }
        for (bool hit : golden_hit) {
            out.false_negative += hit ? 0 : 1;
        }
        return out;
    }

private:
    /// Fraction of `part` found in `whole`; an empty `part` counts as covered.
    static double coverage(const std::unordered_set<std::string>& part, const std::unordered_set<std::string>& whole) {
        if (part.empty()) {
            return 1.0;
        }
        size_t found = 0;
        for (const auto& w : part) {
            found += whole.contains(w) ? 1 : 0;
        }
        return static_cast<double>(found) / static_cast<double>(part.size());
    }

    double support_threshold_;
    double match_threshold_;
};

/// Judge backed by a chat model. Every step asks for a JSON reply.
class LLMJudge final : public JudgeProvider {
public:
    explicit LLMJudge(std::shared_ptr<LLMProvider> llm) : llm_(std::move(llm)) {}

    std::string name() const override { return "llm:" + llm_->name(); }

    std::set<size_t> relevant_sentences(const std::string& question,
                                        const std::vector<std::string>& sentences) override {
        nlohmann::json numbered = nlohmann::json::array();
        for (size_t i = 0; i < sentences.size(); ++i) {
            numbered.push_back({{"index", i}, {"sentence", sentences[i]}});
        }
        const auto reply = ask("Question: " + question +
                               "\nSentences (JSON): " + numbered.dump() +
                               "\nReturn a JSON array with the indices of the sentences needed to answer the question."
                               " Return [] if none is relevant.");
        std::set<size_t> out;
        for (const auto& v : reply) {
            out.insert(v.get<size_t>());
        }
        return out;
    }

    std::vector<std::string> decompose(const std::string& answer) override {
        const auto reply = ask("Answer: " + answer +
                               "\nBreak the answer into short self-contained factual statements."
                               " Return them as a JSON array of strings.");
        return reply.get<std::vector<std::string>>();
    }

    bool verify(const std::string& statement, const std::string& context) override {
        const auto reply = ask("Context: " + context + "\nStatement: " + statement +
                               "\nCan the statement be inferred from the context? Reply with JSON {\"verdict\": 1} or"
                               " {\"verdict\": 0}.");
        return reply.at("verdict").get<int>() == 1;
    }

    StatementClassification classify(const std::vector<std::string>& answer_statements,
                                     const std::vector<std::string>& golden_statements) override {
        const auto reply = ask("Answer statements: " + nlohmann::json(answer_statements).dump() +
                               "\nGround truth statements: " + nlohmann::json(golden_statements).dump() +
                               "\nCount TP (answer statements supported by the ground truth), FP (answer statements"
                               " not supported) and FN (ground truth statements missing from the answer). Reply with"
                               " JSON {\"TP\": n, \"FP\": n, \"FN\": n}.");
        return {reply.at("TP").get<size_t>(), reply.at("FP").get<size_t>(), reply.at("FN").get<size_t>()};
    }

private:
    nlohmann::json ask(const std::string& prompt) {
        const std::string text = llm_->generate(prompt, GenerationParams{0.0, std::nullopt});
        const auto start = text.find_first_of("[{");
        if (start == std::string::npos) {
            throw ProviderError(name() + ": reply contains no JSON");
        }
        try {
            return nlohmann::json::parse(text.substr(start, text.find_last_of("]}") + 1 - start));
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(name() + ": malformed JSON reply: " + e.what());
        }
    }

    std::shared_ptr<LLMProvider> llm_;
};

} // namespace ragforge
