#pragma once

#include "ragforge/corpus.hpp"
#include "ragforge/eval.hpp"
#include "ragforge/http.hpp"
#include "ragforge/rag_engine.hpp"
#include "ragforge/remote.hpp"
#include "ragforge/retriever.hpp"
#include "ragforge/service.hpp"
#include "ragforge/vector_index.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ragforge::cli {

/// "extractive", "script:PATH" (mock replaying a script file, named after the
/// file stem) or "remote:MODEL".
inline std::shared_ptr<LLMProvider> make_llm(const std::string& spec) {
    if (spec == "extractive") {
        return std::make_shared<ExtractiveProvider>();
    }
    if (spec.starts_with("script:")) {
        const std::filesystem::path path = spec.substr(7);
        return std::make_shared<MockProvider>(MockProvider::load_script(path), path.stem().string());
    }
    if (spec.starts_with("remote:")) {
        return std::make_shared<RemoteLLMProvider>(RemoteLLMProvider::config_from_env(spec.substr(7)));
    }
    throw ValidationError("unknown provider '" + spec + "' (expected extractive, script:PATH or remote:MODEL)");
}

inline std::shared_ptr<EmbeddingProvider> make_embedder(const std::string& kind, size_t dim) {
    if (kind == "local") {
        return std::make_shared<LocalEmbedder>(dim);
    }
    if (kind == "remote") {
        return std::make_shared<RemoteEmbeddingProvider>(RemoteEmbeddingProvider::config_from_env(), dim);
    }
    throw ValidationError("unknown embedder '" + kind + "' (expected local|remote)");
}

/// Loads an index file and its chunk sidecar behind a retriever.
inline std::shared_ptr<VectorRetriever> open_retriever(const std::filesystem::path& index_path,
                                                       const std::string& embedder_kind) {
    auto index = std::make_shared<VectorIndex>(VectorIndex::load(index_path));
    auto store = std::make_shared<ChunkStore>(ChunkStore::load(ChunkStore::sidecar_path(index_path)));
    return std::make_shared<VectorRetriever>(index, store, make_embedder(embedder_kind, index->dim()));
}

/// Settings for `serve`, read from a JSON file.
struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> index;
    std::optional<std::filesystem::path> corpus;
    std::filesystem::path log = "ragforge-service.jsonl";
    std::optional<std::filesystem::path> static_dir;
    std::string llm = "extractive";
    std::string embedder = "local";
    size_t dim = LocalEmbedder::kDefaultDim;
    GenerationConfig generation;

    static ServeConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
        auto resolve = [&](const std::string& p) { return base.empty() ? std::filesystem::path(p) : base / p; };
        ServeConfig c;
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        if (c.port < 0 || c.port > 65535) {
            throw ValidationError("port out of range: " + std::to_string(c.port));
        }
        if (j.contains("index")) {
            c.index = resolve(j["index"].get<std::string>());
        }
        if (j.contains("corpus")) {
            c.corpus = resolve(j["corpus"].get<std::string>());
        }
        if (!c.index && !c.corpus) {
            throw ValidationError("serve config needs 'index' or 'corpus'");
        }
        if (j.contains("log")) {
            c.log = resolve(j["log"].get<std::string>());
        }
        if (j.contains("static_dir")) {
            c.static_dir = resolve(j["static_dir"].get<std::string>());
        }
        c.llm = j.value("llm", c.llm);
        c.embedder = j.value("embedder", c.embedder);
        c.dim = j.value("dim", c.dim);
        if (j.contains("prompt_profile") && !j.contains("generation")) {
            c.generation.prompt_profile = parse_prompt_profile(j["prompt_profile"].get<std::string>());
        }
        if (j.contains("generation")) {
            c.generation = GenerationConfig::from_json(j["generation"]);
        }
        return c;
    }

    static ServeConfig load(const std::filesystem::path& path) {
        try {
            return from_json(nlohmann::json::parse(io::read_file(path)), path.parent_path());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }
};

inline std::shared_ptr<const Retriever> serve_retriever(const ServeConfig& c) {
    if (c.index) {
        return open_retriever(*c.index, c.embedder);
    }
    auto embedder = make_embedder(c.embedder, c.dim);
    auto built = build_index(load_documents(*c.corpus), *embedder);
    return std::make_shared<VectorRetriever>(std::make_shared<VectorIndex>(std::move(built.index)),
                                             std::make_shared<ChunkStore>(std::move(built.store)), embedder);
}

struct Streams {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

inline int run(int argc, const char* const* argv, Streams io_streams) {
    auto& out = io_streams.out;
    auto& err = io_streams.err;

    CLI::App app{"Retrieval-augmented chat assistant over a university document corpus", "ragforge"};
    app.require_subcommand(1);
    app.fallthrough(false);

    // build-corpus
    std::filesystem::path courses_path, info_path, corpus_out;
    std::string variant = "clear";
    auto* build_corpus = app.add_subcommand("build-corpus", "Render course and info records into a document corpus");
    build_corpus->add_option("--courses", courses_path, "Course records (JSONL)")->required();
    build_corpus->add_option("--info", info_path, "Info documents (JSONL)")->required();
    build_corpus->add_option("--variant", variant, "clear|full|emb")->check(CLI::IsMember({"clear", "full", "emb"}));
    build_corpus->add_option("--out", corpus_out, "Output document file (JSONL)")->required();

    // build-index
    std::filesystem::path index_corpus, index_out;
    size_t dim = LocalEmbedder::kDefaultDim, chunk_size = 1000, overlap = 50, batch = 64;
    std::string embed_provider = "local";
    auto* build_idx = app.add_subcommand("build-index", "Chunk and embed a corpus into a vector index");
    build_idx->add_option("--corpus", index_corpus, "Document file (JSONL)")->required();
    build_idx->add_option("--out", index_out, "Index file; chunks go to <out>.chunks.jsonl")->required();
    build_idx->add_option("--dim", dim, "Local embedding dimension")->check(CLI::PositiveNumber);
    build_idx->add_option("--provider", embed_provider, "local|remote")->check(CLI::IsMember({"local", "remote"}));
    build_idx->add_option("--chunk-size", chunk_size, "Tokens per chunk")->check(CLI::PositiveNumber);
    build_idx->add_option("--overlap", overlap, "Tokens shared by consecutive chunks");
    build_idx->add_option("--batch", batch, "Texts per embedding request")->check(CLI::PositiveNumber);

    // chat
    std::filesystem::path chat_index;
    std::string profile = "condensed", llm_spec = "extractive", chat_embedder = "local";
    size_t k = 4;
    double temperature = 0.0;
    std::optional<size_t> max_new_tokens;
    bool deployment = false;
    auto* chat = app.add_subcommand("chat", "Interactive question answering in the terminal");
    chat->add_option("--index", chat_index, "Index file")->required();
    chat->add_option("--profile", profile, "custom|condensed")->check(CLI::IsMember({"custom", "condensed"}));
    chat->add_option("--llm", llm_spec, "extractive|script:PATH|remote:MODEL");
    chat->add_option("--embedder", chat_embedder, "local|remote")->check(CLI::IsMember({"local", "remote"}));
    chat->add_option("--k", k, "Chunks retrieved per question")->check(CLI::PositiveNumber);
    chat->add_option("--temperature", temperature)->check(CLI::NonNegativeNumber);
    chat->add_option("--max-new-tokens", max_new_tokens)->check(CLI::PositiveNumber);
    chat->add_flag("--deployment-prompt", deployment, "Use the revised prompt from the public deployment");

    // serve
    std::filesystem::path serve_config;
    std::optional<int> serve_port;
    auto* serve = app.add_subcommand("serve", "Run the HTTP chat service");
    serve->add_option("--config", serve_config, "Service configuration (JSON)")->required();
    serve->add_option("--port", serve_port, "Override the configured port")->check(CLI::Range(0, 65535));

    // eval
    std::filesystem::path golden_path, eval_out, eval_index;
    std::vector<std::string> providers;
    std::string judge_kind = "scripted", judge_model = "gpt-4-turbo", eval_embedder = "local";
    size_t eval_tokens = 256, eval_k = 4, workers = 1;
    auto* eval = app.add_subcommand("eval", "Score providers against golden question/answer pairs");
    eval->add_option("--golden", golden_path, "Golden pairs (JSONL)")->required();
    eval->add_option("--providers", providers, "Comma-separated provider specs")->required()->delimiter(',');
    eval->add_option("--index", eval_index, "Index file used for retrieval")->required();
    eval->add_option("--judge", judge_kind, "scripted|remote")->check(CLI::IsMember({"scripted", "remote"}));
    eval->add_option("--judge-model", judge_model, "Model for the remote judge");
    eval->add_option("--embedder", eval_embedder, "local|remote")->check(CLI::IsMember({"local", "remote"}));
    eval->add_option("--max-new-tokens", eval_tokens)->check(CLI::PositiveNumber);
    eval->add_option("--k", eval_k)->check(CLI::PositiveNumber);
    eval->add_option("--workers", workers)->check(CLI::PositiveNumber);
    eval->add_option("--out", eval_out, "Report file (JSONL); metadata goes to <out>.meta.json")->required();

    // export-finetune
    std::filesystem::path pairs_path, ft_out, ft_corpus, valid_out;
    std::string generator = "extractive";
    uint64_t seed = 0;
    auto* export_ft = app.add_subcommand("export-finetune", "Write fine-tuning records");
    export_ft->add_option("--pairs", pairs_path, "Prepared pairs (JSONL)")->required();
    export_ft->add_option("--out", ft_out, "Training records (JSONL)")->required();
    export_ft->add_option("--corpus", ft_corpus, "Clear-variant documents to generate course pairs from");
    export_ft->add_option("--generator", generator, "Provider generating course answers");
    export_ft->add_option("--valid-out", valid_out, "Split off a validation set into this file");
    export_ft->add_option("--seed", seed, "Seed for the validation split");

    // stats
    std::filesystem::path stats_log;
    bool stats_json = false;
    auto* stats = app.add_subcommand("stats", "Usage statistics from a service record log");
    stats->add_option("--log", stats_log, "Service record log")->required();
    stats->add_flag("--json", stats_json, "Print JSON instead of a table");

    if (argc <= 1) {
        err << app.help();
        return 2;
    }
    if (const std::string first = argv[1]; !first.starts_with("-") && app.get_subcommand_no_throw(first) == nullptr) {
        err << "usage error: unknown command '" << first << "'\n" << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::RequiredError& e) {
        // Name every missing flag of the chosen command, not only the first.
        std::string missing;
        for (const auto* sub : app.get_subcommands()) {
            for (const auto* opt : sub->get_options()) {
                if (opt->get_required() && opt->count() == 0) {
                    missing += (missing.empty() ? "" : ", ") + opt->get_name();
                }
            }
        }
        err << "usage error: " << (missing.empty() ? std::string(e.what()) : "missing required flags: " + missing)
            << "\n";
        err << "run 'ragforge --help' or 'ragforge <command> --help' for usage\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        err << "run 'ragforge --help' or 'ragforge <command> --help' for usage\n";
        return 2;
    }

    try {
        if (*build_corpus) {
            const auto docs = build_variant(load_courses(courses_path), load_documents(info_path), parse_variant(variant));
            io::atomic_write(corpus_out, format_records(docs));
            out << corpus_stats(docs).to_table();
            out << "wrote " << docs.size() << " documents to " << corpus_out.string() << "\n";
        } else if (*build_idx) {
            ChunkParams params{chunk_size, overlap};
            params.validate();
            auto embedder = make_embedder(embed_provider, embed_provider == "local" ? dim : 0);
            const auto docs = load_documents(index_corpus);
            const auto built = build_index(docs, *embedder, params, batch);
            built.index.save(index_out);
            built.store.save(ChunkStore::sidecar_path(index_out));
            out << "indexed " << built.store.size() << " chunks from " << docs.size() << " documents (dim "
                << built.index.dim() << ", " << embedder->name() << ")\n";
        } else if (*chat) {
            GenerationConfig cfg;
            cfg.prompt_profile = parse_prompt_profile(profile);
            cfg.k = k;
            cfg.temperature = temperature;
            cfg.max_new_tokens = max_new_tokens;
            cfg.deployment_prompt = deployment;
            RagEngine engine(open_retriever(chat_index, chat_embedder), make_llm(llm_spec), cfg);
            ChatSession session("terminal");
            std::string line;
            out << "> " << std::flush;
            while (std::getline(io_streams.in, line)) {
                if (line == "/exit" || line == "/quit") {
                    break;
                }
                if (!trim(line).empty()) {
                    try {
                        const auto r = engine.answer(session, line);
                        out << r.answer << "\n";
                        if (!r.turn.source_doc_ids.empty()) {
                            out << "[fonti:";
                            for (const auto& d : r.turn.source_doc_ids) {
                                out << " " << d;
                            }
                            out << "]\n";
                        }
                    } catch (const ProviderError& e) {
                        err << "service degraded: " << e.what() << "\n";
                    }
                }
                out << "> " << std::flush;
            }
            out << "\n";
        } else if (*serve) {
            auto cfg = ServeConfig::load(serve_config);
            if (serve_port) {
                cfg.port = *serve_port;
            }
            auto engine = std::make_shared<RagEngine>(serve_retriever(cfg), make_llm(cfg.llm), cfg.generation);
            auto service = ChatService::open(engine, cfg.log);
            httplib::Server server;
            mount_routes(server, *service, cfg.static_dir);
            out << "listening on http://" << cfg.host << ":" << cfg.port << " (" << service->session_count()
                << " sessions restored)" << std::endl;
            if (!server.listen(cfg.host, cfg.port)) {
                throw IoError("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
            }
        } else if (*eval) {
            std::vector<std::shared_ptr<LLMProvider>> llms;
            for (const auto& p : providers) {
                llms.push_back(make_llm(p));
            }
            std::unique_ptr<JudgeProvider> judge;
            if (judge_kind == "remote") {
                judge = std::make_unique<LLMJudge>(
                    std::make_shared<RemoteLLMProvider>(RemoteLLMProvider::config_from_env(judge_model)));
            } else {
                judge = std::make_unique<LexicalJudge>();
            }
            auto index = std::make_shared<VectorIndex>(VectorIndex::load(eval_index));
            auto store = std::make_shared<ChunkStore>(ChunkStore::load(ChunkStore::sidecar_path(eval_index)));
            auto embedder = make_embedder(eval_embedder, index->dim());
            VectorRetriever retriever(index, store, embedder);
            EvalConfig cfg;
            cfg.k = eval_k;
            cfg.max_new_tokens = eval_tokens;
            cfg.workers = workers;
            const auto result = run_comparison(llms, load_golden(golden_path), retriever, *judge, *embedder, cfg);
            write_report(result, eval_out);
            out << format_table(result);
            out << "wrote " << result.rows.size() << " rows to " << eval_out.string() << "\n";
            if (!result.complete()) {
                err << "some rows failed; the report is partial\n";
                return 1;
            }
        } else if (*export_ft) {
            auto pairs = load_records<FineTuneExample>(pairs_path);
            if (!ft_corpus.empty()) {
                auto llm = make_llm(generator);
                auto generated = generate_finetune_pairs(load_documents(ft_corpus), *llm, pairs);
                for (const auto& f : generated.failures) {
                    err << "generation failed for " << f.doc_id << ": " << f.message << "\n";
                }
                if (!generated.failures.empty()) {
                    return 1;
                }
                pairs = std::move(generated.examples);
            }
            if (!valid_out.empty()) {
                const auto split = split_validation(pairs, seed);
                export_finetune(split.train, ft_out);
                export_finetune(split.valid, valid_out);
                out << "train " << split.train.size() << " -> " << ft_out.string() << "\n";
                out << "validation " << split.valid.size() << " -> " << valid_out.string() << "\n";
            } else {
                export_finetune(pairs, ft_out);
                out << "wrote " << pairs.size() << " records to " << ft_out.string() << "\n";
            }
        } else if (*stats) {
            if (!std::filesystem::exists(stats_log)) {
                throw IoError("no such log: " + stats_log.string());
            }
            const auto s = stats_from_log(stats_log);
            if (stats_json) {
                out << s.to_json().dump(2) << "\n";
            } else {
                out << "questions " << s.total_questions << ", sessions " << s.sessions << ", feedback " << s.feedback
                    << "\n";
                const auto report = s.to_json();
                for (const auto& [name, n] : report.at("categories").items()) {
                    out << "  " << name << " " << n.get<size_t>() << "\n";
                }
                out << "ratings";
                for (const auto& [r, n] : s.ratings) {
                    out << " " << r << ":" << n;
                }
                out << "\n";
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace ragforge::cli
