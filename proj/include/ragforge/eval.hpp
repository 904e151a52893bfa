#pragma once

#include "ragforge/corpus.hpp"
#include "ragforge/embedding.hpp"
#include "ragforge/io.hpp"
#include "ragforge/judge.hpp"
#include "ragforge/llm.hpp"
#include "ragforge/metrics.hpp"
#include "ragforge/prompt.hpp"
#include "ragforge/retriever.hpp"
#include "ragforge/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ragforge {

struct GoldenPair {
    std::string question;
    std::string golden_answer;
    std::vector<std::string> source_doc_ids;

    friend bool operator==(const GoldenPair&, const GoldenPair&) = default;
};

inline void to_json(nlohmann::json& j, const GoldenPair& g) {
    j = nlohmann::json{{"question", g.question}, {"golden_answer", g.golden_answer}, {"source_doc_ids", g.source_doc_ids}};
}

inline void from_json(const nlohmann::json& j, GoldenPair& g) {
    g.question = j.at("question").get<std::string>();
    g.golden_answer = j.at("golden_answer").get<std::string>();
    g.source_doc_ids = j.value("source_doc_ids", std::vector<std::string>{});
    if (trim(g.question).empty() || trim(g.golden_answer).empty()) {
        throw ValidationError("golden pair with empty question or answer");
    }
}

inline std::vector<GoldenPair> load_golden(const std::filesystem::path& path) {
    return load_records<GoldenPair>(path);
}

// ---------------------------------------------------------------------------
// Judge-mediated metrics. A failing judge makes the metric undefined (nullopt).

namespace detail {

template <typename F>
auto judged(F&& step) -> std::optional<decltype(step())> {
    try {
        return step();
    } catch (const ProviderError&) {
        return std::nullopt;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

} // namespace detail

/// Fraction of context sentences the judge marks as needed for the question.
inline std::optional<double> context_relevancy(const std::string& question, const std::string& context,
                                               JudgeProvider& judge) {
    const auto sentences = split_sentences(context);
    if (sentences.empty()) {
        throw ValidationError("context_relevancy: context has no sentences");
    }
    return detail::judged([&]() -> double {
        const auto picked = judge.relevant_sentences(question, sentences);
        for (size_t i : picked) {
            if (i >= sentences.size()) {
                throw ProviderError("judge returned sentence index " + std::to_string(i) + " of " +
                                    std::to_string(sentences.size()));
            }
        }
        return static_cast<double>(picked.size()) / static_cast<double>(sentences.size());
    });
}

/// Supported statements over all statements; undefined when the answer
/// decomposes into nothing.
inline std::optional<double> faithfulness(const std::string& answer, const std::vector<std::string>& contexts,
                                          JudgeProvider& judge) {
    if (trim(answer).empty()) {
        throw ValidationError("faithfulness: answer must not be empty");
    }
    const std::string context = join_context(contexts);
    auto ratio = detail::judged([&]() -> std::optional<double> {
        const auto statements = judge.decompose(answer);
        if (statements.empty()) {
            return std::nullopt;
        }
        size_t supported = 0;
        for (const auto& s : statements) {
            supported += judge.verify(s, context) ? 1 : 0;
        }
        return static_cast<double>(supported) / static_cast<double>(statements.size());
    });
    return ratio ? *ratio : std::nullopt;
}

struct CorrectnessWeights {
    double factual = 0.75;
    double semantic = 0.25;
};

/// Statement F1 from the judge's TP/FP/FN counts.
inline double statement_f1(const StatementClassification& c) {
    const double denom = static_cast<double>(c.true_positive) +
                         0.5 * static_cast<double>(c.false_positive + c.false_negative);
    return denom == 0.0 ? 0.0 : static_cast<double>(c.true_positive) / denom;
}

/// Weighted blend of statement F1 and clamped embedding cosine.
inline double correctness_score(const StatementClassification& c, double similarity,
                                const CorrectnessWeights& w = {}) {
    return w.factual * statement_f1(c) + w.semantic * std::max(0.0, similarity);
}

inline std::optional<double> answer_correctness(const std::string& answer, const GoldenPair& golden,
                                                JudgeProvider& judge, EmbeddingProvider& embedder,
                                                const CorrectnessWeights& weights = {}) {
    return detail::judged([&]() -> double {
        const auto answer_statements = judge.decompose(answer);
        const auto golden_statements = judge.decompose(golden.golden_answer);
        const auto c = judge.classify(answer_statements, golden_statements);
        if (c.true_positive > answer_statements.size()) {
            throw ProviderError("judge reported more true positives than answer statements");
        }
        const auto vectors = embedder.embed({answer, golden.golden_answer});
        return correctness_score(c, cosine(vectors.at(0), vectors.at(1)), weights);
    });
}

// ---------------------------------------------------------------------------
// Multi-provider comparison

struct MetricScores {
    double bleu = 0.0;
    RougeL rouge;
    std::vector<std::optional<double>> context_relevancy;
    std::optional<double> faithfulness;
    std::optional<double> answer_correctness;
};

struct QuestionContext {
    std::string question_id;
    std::vector<std::string> refs;
    std::vector<std::string> doc_ids;
    std::vector<std::string> texts;
    std::string hash;
    std::vector<std::optional<double>> relevancy;
};

struct EvalRow {
    std::string provider;
    size_t question_index = 0;
    std::string question_id;
    bool ok = false;
    std::string error;
    std::string answer;
    std::string context_hash;
    MetricScores scores;
};

struct EvalConfig {
    size_t k = 4;
    size_t max_new_tokens = 256;
    double temperature = 0.0;
    bool deployment_prompt = false;
    size_t workers = 1;
    CorrectnessWeights weights;

    nlohmann::json snapshot() const {
        return {{"k", k},
                {"max_new_tokens", max_new_tokens},
                {"temperature", temperature},
                {"prompt", deployment_prompt ? "custom-deployment" : "custom"},
                {"correctness_weights", {weights.factual, weights.semantic}}};
    }
};

struct EvalRun {
    EvalConfig config;
    std::vector<std::string> providers;
    std::string judge;
    std::vector<QuestionContext> contexts;
    std::vector<EvalRow> rows;

    bool complete() const {
        return std::all_of(rows.begin(), rows.end(), [](const EvalRow& r) { return r.ok; });
    }
};

inline std::string context_hash(const std::vector<std::string>& refs, const std::vector<std::string>& texts) {
    std::string material;
    for (size_t i = 0; i < refs.size(); ++i) {
        material += refs[i];
        material += '\x1f';
        material += texts[i];
        material += '\x1e';
    }
    return io::hex64(io::fnv1a64(material));
}

/// Retrieves contexts once per question, then has every provider answer each
/// question one-shot with the custom prompt over those same contexts.
inline EvalRun run_comparison(const std::vector<std::shared_ptr<LLMProvider>>& providers,
                              const std::vector<GoldenPair>& golden, const Retriever& retriever, JudgeProvider& judge,
                              EmbeddingProvider& embedder, const EvalConfig& config = {}) {
    if (providers.empty()) {
        throw ValidationError("run_comparison needs at least one provider");
    }
    if (golden.empty()) {
        throw ValidationError("run_comparison needs at least one golden pair");
    }
    EvalRun run;
    run.config = config;
    run.judge = judge.name();
    for (const auto& p : providers) {
        run.providers.push_back(p->name());
    }

    for (size_t q = 0; q < golden.size(); ++q) {
        QuestionContext ctx;
        ctx.question_id = "Q" + std::to_string(q + 1);
        for (const auto& r : retriever.retrieve(golden[q].question, config.k)) {
            ctx.refs.push_back(r.ref);
            ctx.doc_ids.push_back(r.doc_id);
            ctx.texts.push_back(r.text);
            ctx.relevancy.push_back(context_relevancy(golden[q].question, r.text, judge));
        }
        ctx.hash = context_hash(ctx.refs, ctx.texts);
        run.contexts.push_back(std::move(ctx));
    }

    const PromptTemplate custom = PromptSet::for_profile(config.deployment_prompt).custom;
    const GenerationParams params{config.temperature, config.max_new_tokens};
    run.rows.resize(providers.size() * golden.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t cell = next++; cell < run.rows.size(); cell = next++) {
            const size_t p = cell / golden.size();
            const size_t q = cell % golden.size();
            const auto& ctx = run.contexts[q];
            EvalRow& row = run.rows[cell];
            row.provider = providers[p]->name();
            row.question_index = q;
            row.question_id = ctx.question_id;
            row.context_hash = ctx.hash;
            row.scores.context_relevancy = ctx.relevancy;
            const std::string prompt =
                custom.render({{"question", golden[q].question}, {"context", join_context(ctx.texts)}});
            try {
                row.answer = providers[p]->generate(prompt, params);
            } catch (const Error& e) {
                row.error = e.what();
                continue;
            }
            row.ok = true;
            row.scores.bleu = bleu(row.answer, golden[q].golden_answer);
            row.scores.rouge = rouge_l(row.answer, golden[q].golden_answer);
            if (!trim(row.answer).empty()) {
                row.scores.faithfulness = faithfulness(row.answer, ctx.texts, judge);
            }
            row.scores.answer_correctness = answer_correctness(row.answer, golden[q], judge, embedder, config.weights);
        }
    };
    const size_t workers = std::clamp<size_t>(config.workers, 1, run.rows.size());
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (size_t i = 0; i < workers; ++i) {
            pool.emplace_back(worker);
        }
    }

    std::stable_sort(run.rows.begin(), run.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        return a.provider != b.provider ? a.provider < b.provider : a.question_index < b.question_index;
    });
    return run;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::ordered_json row_json(const EvalRow& row) {
    nlohmann::ordered_json j;
    j["provider"] = row.provider;
    j["question_id"] = row.question_id;
    if (row.ok) {
        j["bleu"] = row.scores.bleu;
        j["rouge_l_p"] = row.scores.rouge.precision;
        j["rouge_l_r"] = row.scores.rouge.recall;
        j["rouge_l_f"] = row.scores.rouge.f;
    } else {
        for (const char* key : {"bleu", "rouge_l_p", "rouge_l_r", "rouge_l_f"}) {
            j[key] = nullptr;
        }
    }
    auto relevancy = nlohmann::ordered_json::array();
    for (const auto& v : row.scores.context_relevancy) {
        relevancy.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
    }
    j["context_relevancy"] = relevancy;
    j["faithfulness"] = row.scores.faithfulness ? nlohmann::ordered_json(*row.scores.faithfulness) : nullptr;
    j["answer_correctness"] =
        row.scores.answer_correctness ? nlohmann::ordered_json(*row.scores.answer_correctness) : nullptr;
    j["status"] = row.ok ? "ok" : "failed";
    j["context_hash"] = row.context_hash;
    if (!row.ok) {
        j["error"] = row.error;
    }
    return j;
}

inline std::string format_report(const EvalRun& run) {
    std::string out;
    for (const auto& row : run.rows) {
        out += row_json(row).dump();
        out += '\n';
    }
    return out;
}

/// Config snapshot plus the shared per-question contexts.
inline nlohmann::ordered_json report_meta(const EvalRun& run) {
    nlohmann::ordered_json j;
    j["config"] = run.config.snapshot();
    j["providers"] = run.providers;
    j["judge"] = run.judge;
    auto contexts = nlohmann::ordered_json::array();
    for (const auto& c : run.contexts) {
        contexts.push_back({{"question_id", c.question_id}, {"context_hash", c.hash}, {"refs", c.refs}, {"doc_ids", c.doc_ids}});
    }
    j["contexts"] = contexts;
    return j;
}

inline std::filesystem::path meta_path(const std::filesystem::path& report) {
    auto p = report;
    p += ".meta.json";
    return p;
}

inline void write_report(const EvalRun& run, const std::filesystem::path& path) {
    io::atomic_write(path, format_report(run));
    io::atomic_write(meta_path(path), report_meta(run).dump(2) + "\n");
}

inline std::string format_table(const EvalRun& run) {
    auto num = [](const std::optional<double>& v) {
        if (!v) {
            return std::string("   -  ");
        }
        char buf[16];
        std::snprintf(buf, sizeof buf, "%6.4f", *v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "provider             question  bleu    rougeL  faith   correct relevancy\n";
    for (const auto& row : run.rows) {
        char head[48];
        std::snprintf(head, sizeof head, "%-20.20s %-8s ", row.provider.c_str(), row.question_id.c_str());
        out << head;
        if (!row.ok) {
            out << "FAILED: " << row.error << '\n';
            continue;
        }
        out << num(row.scores.bleu) << "  " << num(row.scores.rouge.f) << "  " << num(row.scores.faithfulness) << "  "
            << num(row.scores.answer_correctness) << "  [";
        for (size_t i = 0; i < row.scores.context_relevancy.size(); ++i) {
            out << (i ? " " : "") << num(row.scores.context_relevancy[i]);
        }
        out << "]\n";
    }
    return out.str();
}

} // namespace ragforge
