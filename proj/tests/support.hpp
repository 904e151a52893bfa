#pragma once

#include "ragforge/corpus.hpp"
#include "ragforge/rag_engine.hpp"
#include "ragforge/retriever.hpp"

#include <memory>
#include <vector>

namespace ragforge::testing {

inline std::vector<RawDocument> tiny_corpus() {
    auto doc = [](std::string id, std::string text) {
        return RawDocument{std::move(id), Section::FutureStudents, DocKind::Info, std::move(text), "", "", ""};
    };
    return {doc("tasse", "Le tasse si pagano tramite PagoPA. La prima rata delle tasse scade il 30 settembre."),
            doc("segreteria", "La segreteria riceve il lunedì e il mercoledì. Si prenota con la app SolariQ."),
            doc("borse", "Le borse di studio sono assegnate in base all'ISEE. Il bando esce a luglio."),
            doc("chimica", "La magistrale di chimica dura due anni. Ha sede a Palermo."),
            doc("ia", "Intelligenza Artificiale 1 è tenuta dal professore Gaglio nel primo semestre.")};
}

struct Stack {
    std::shared_ptr<LocalEmbedder> embedder;
    std::shared_ptr<VectorRetriever> retriever;
};

inline Stack make_stack(const std::vector<RawDocument>& docs = tiny_corpus(), size_t dim = 128) {
    auto embedder = std::make_shared<LocalEmbedder>(dim);
    auto built = build_index(docs, *embedder, {1000, 50});
    auto retriever = std::make_shared<VectorRetriever>(std::make_shared<VectorIndex>(std::move(built.index)),
                                                       std::make_shared<ChunkStore>(std::move(built.store)), embedder);
    return {embedder, retriever};
}

/// Clock that advances by one millisecond per reading.
struct StepClock {
    std::shared_ptr<int64_t> now = std::make_shared<int64_t>(1'700'000'000'000);
    int64_t operator()() const { return (*now)++; }
};

/// Mock that answers condensation prompts with a fixed rewrite and every
/// other prompt with a fixed answer.
inline std::shared_ptr<MockProvider> routing_mock(std::string answer = "Si pagano con PagoPA.") {
    return std::make_shared<MockProvider>(std::vector<ScriptEntry>{
        {PromptMatcher::contains("Domanda singola"), "Come si pagano le tasse?", true, false},
        {PromptMatcher::any(), std::move(answer), true, false}});
}

inline std::shared_ptr<RagEngine> make_engine(std::shared_ptr<LLMProvider> llm, StepClock clock = {},
                                              PromptProfile profile = PromptProfile::Condensed) {
    GenerationConfig cfg;
    cfg.prompt_profile = profile;
    return std::make_shared<RagEngine>(make_stack().retriever, std::move(llm), cfg, clock);
}

} // namespace ragforge::testing
