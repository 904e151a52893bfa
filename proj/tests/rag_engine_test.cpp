#include "ragforge/rag_engine.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace ragforge;
using ragforge::testing::make_stack;
using ragforge::testing::StepClock;

namespace {

ChatSession two_turn_session() {
    ChatSession s("s1");
    s.append({"Quali corsi di ingegneria ci sono?", "Ci sono Ingegneria Informatica e Meccanica.", {}, {}, 1, 2});
    s.append({"E la magistrale?", "Esiste la magistrale in Ingegneria Informatica.", {}, {}, 3, 4});
    return s;
}

std::shared_ptr<MockProvider> routing_mock() {
    return std::make_shared<MockProvider>(std::vector<ScriptEntry>{
        {PromptMatcher::contains("Domanda singola"), "Come si pagano le tasse?", true, false},
        {PromptMatcher::any(), "Si pagano con PagoPA.", true, false}});
}

} // namespace

TEST(PromptTemplate, CustomGoldenSubstitution) {
    const auto text = render_prompt(PromptSet::standard().custom, {{"question", "Q"}, {"context", "D"}});
    EXPECT_EQ(text,
              "Sei unipa-gpt, il chatbot e assistente virtuale dell'Università degli Studi di Palermo.\n"
              "Rispondi cordialmente e in forma colloquiale alle domande che ti vengono poste.\n"
              "Se ricevi un saluto, rispondi salutando e presentandoti.\n"
              "Se ricevi una domanda riguardante l'università degli studi di Palermo,\n"
              "rispondi in base ai documenti che ti vengono dati insieme alla domanda.\n"
              "Se non sai rispondere, scusati e suggerisci di consultare il sito web, non inventare risposte.\n"
              "Question: Q\n"
              "Documenti: D");
}

TEST(PromptTemplate, DeploymentPromptCarriesRectorLine) {
    const auto text = render_prompt(PromptSet::deployment().custom, {{"question", "Q"}, {"context", "D"}});
    EXPECT_NE(text.find("Ricordati che il rettore dell'Università è il professore Massimo Midiri."), std::string::npos);
    EXPECT_TRUE(text.ends_with("Domanda: Q\nInformazioni: D"));
}

TEST(PromptTemplate, NoPlaceholdersUnchanged) {
    EXPECT_EQ(render_text("nessun segnaposto {JSON: 1}", {}), "nessun segnaposto {JSON: 1}");
}

TEST(PromptTemplate, MissingBindingNamed) {
    try {
        render_prompt(PromptSet::standard().custom, {{"question", "Q"}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("{context}"), std::string::npos);
    }
}

TEST(PromptTemplate, ValidatesSlots) {
    EXPECT_THROW(PromptTemplate(PromptKind::Custom, "{question} only"), ValidationError);
    EXPECT_THROW(PromptTemplate(PromptKind::Condense, "{chat_history} {question} {extra}"), ValidationError);
    EXPECT_NO_THROW(PromptTemplate(PromptKind::Condense, "{chat_history}/{question}"));
}

TEST(PromptTemplate, CondenseGoldenFile) {
    const auto text = render_prompt(PromptSet::standard().condense,
                                    {{"chat_history", serialize_history(two_turn_session())},
                                     {"question", "Chi insegna Intelligenza Artificiale 1?"}});
    EXPECT_EQ(text, io::read_file(std::string(RAGFORGE_FIXTURES) + "/condense_two_turns.txt"));
}

TEST(PromptTemplate, ContextSlotInjective) {
    std::vector<std::string> docs{"alfa.", "beta.", "gamma.", "delta."};
    std::set<std::string> prompts;
    size_t perms = 0;
    std::sort(docs.begin(), docs.end());
    do {
        prompts.insert(render_prompt(PromptSet::standard().custom, {{"question", "q"}, {"context", join_context(docs)}}));
        ++perms;
    } while (std::next_permutation(docs.begin(), docs.end()));
    EXPECT_EQ(prompts.size(), perms);
}

TEST(MockProvider, SingleAnyEntry) {
    MockProvider mock({{PromptMatcher::any(), "ok"}});
    EXPECT_EQ(mock.generate("ciao", {}), "ok");
}

TEST(MockProvider, ExhaustedScriptErrors) {
    MockProvider mock({{PromptMatcher::any(), "ok"}});
    mock.generate("a", {});
    try {
        mock.generate("b", {});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_NE(std::string(e.what()).find("exhausted"), std::string::npos);
    }
}

TEST(MockProvider, ScriptedGapErrors) {
    MockProvider mock({{PromptMatcher::contains("tasse"), "ok"}});
    try {
        mock.generate("borse", {});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_NE(std::string(e.what()).find("gap"), std::string::npos);
    }
}

TEST(MockProvider, EmptyScriptRejected) { EXPECT_THROW(MockProvider({}), ValidationError); }

TEST(MockProvider, LogsPromptAndConfig) {
    MockProvider mock({{PromptMatcher::any(), "ok", true}});
    mock.generate("p1", {0.0, 256});
    mock.generate("p2", {0.5, std::nullopt});
    const auto calls = mock.calls();
    ASSERT_EQ(calls.size(), 2u);
    EXPECT_EQ(calls[0].prompt, "p1");
    EXPECT_EQ(calls[0].params.max_new_tokens, 256u);
    EXPECT_EQ(calls[1].params.temperature, 0.5);
}

TEST(MockProvider, TemperatureZeroDeterministic) {
    MockProvider mock({{PromptMatcher::any(), "stessa risposta", true}});
    EXPECT_EQ(mock.generate("x", {}), mock.generate("x", {}));
}

TEST(Condense, EmptyHistoryNoCall) {
    MockProvider mock({{PromptMatcher::any(), "S"}});
    EXPECT_EQ(condense(ChatSession("s"), "come si pagano le tasse?", mock), "come si pagano le tasse?");
    EXPECT_EQ(mock.call_count(), 0u);
}

TEST(Condense, OneTurnOneCall) {
    ChatSession s("s");
    s.append({"Dove si trova chimica?", "A Palermo.", {}, {}, 0, 0});
    MockProvider mock({{PromptMatcher::contains("Domanda singola"), "S"}});
    EXPECT_EQ(condense(s, "e quanto dura?", mock), "S");
    EXPECT_EQ(mock.call_count(), 1u);
}

TEST(Condense, TrimsProviderOutput) {
    ChatSession s("s");
    s.append({"a?", "b.", {}, {}, 0, 0});
    MockProvider mock({{PromptMatcher::any(), "\n\n  Domanda riformulata?\n"}});
    EXPECT_EQ(condense(s, "c?", mock), "Domanda riformulata?");
}

TEST(Condense, ProviderFailureCarriesSession) {
    ChatSession s("sess-9");
    s.append({"a?", "b.", {}, {}, 0, 0});
    MockProvider mock({{PromptMatcher::any(), "down", false, true}});
    try {
        condense(s, "c?", mock);
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_NE(std::string(e.what()).find("sess-9"), std::string::npos);
    }
}

TEST(RagEngine, CondensedCallSequence) {
    auto stack = make_stack();
    auto mock = routing_mock();
    GenerationConfig cfg;
    cfg.prompt_profile = PromptProfile::Condensed;
    RagEngine engine(stack.retriever, mock, cfg, StepClock{});
    ChatSession session = two_turn_session();
    const auto result = engine.answer(session, "e come si pagano?");
    const auto calls = mock->calls();
    ASSERT_EQ(calls.size(), 2u);
    EXPECT_NE(calls[0].prompt.find("Domanda singola:"), std::string::npos);
    EXPECT_NE(calls[1].prompt.find("Question: Come si pagano le tasse?"), std::string::npos);
    EXPECT_EQ(result.retrieval_query, "Come si pagano le tasse?");
    EXPECT_EQ(result.turn.source_doc_ids.front(), "tasse");
    EXPECT_EQ(session.size(), 3u);
}

TEST(RagEngine, CustomOnlyInlinesHistory) {
    auto stack = make_stack();
    auto mock = routing_mock();
    GenerationConfig cfg;
    cfg.prompt_profile = PromptProfile::CustomOnly;
    RagEngine engine(stack.retriever, mock, cfg, StepClock{});
    ChatSession session = two_turn_session();
    engine.answer(session, "e come si pagano le tasse?");
    const auto calls = mock->calls();
    ASSERT_EQ(calls.size(), 1u);
    EXPECT_NE(calls[0].prompt.find("Utente: E la magistrale?\nAssistente: Esiste"), std::string::npos);
    EXPECT_NE(calls[0].prompt.find("Utente: e come si pagano le tasse?\nDocumenti: "), std::string::npos);
}

TEST(RagEngine, CallContractPerTurn) {
    auto stack = make_stack();
    for (auto profile : {PromptProfile::Condensed, PromptProfile::CustomOnly}) {
        auto mock = routing_mock();
        GenerationConfig cfg;
        cfg.prompt_profile = profile;
        RagEngine engine(stack.retriever, mock, cfg, StepClock{});
        ChatSession session("s");
        for (int turn = 0; turn < 4; ++turn) {
            const size_t before = mock->call_count();
            engine.answer(session, "domanda " + std::to_string(turn) + " sulle tasse?");
            const size_t expected = (profile == PromptProfile::Condensed && turn > 0) ? 2 : 1;
            EXPECT_EQ(mock->call_count() - before, expected) << to_string(profile) << " turn " << turn;
        }
    }
}

TEST(RagEngine, EmptyIndexStillAnswers) {
    auto embedder = std::make_shared<LocalEmbedder>(32);
    auto retriever = std::make_shared<VectorRetriever>(std::make_shared<VectorIndex>(32),
                                                       std::make_shared<ChunkStore>(), embedder);
    auto mock = std::make_shared<MockProvider>(std::vector<ScriptEntry>{{PromptMatcher::any(), "Non lo so."}});
    std::vector<std::string> events;
    RagEngine engine(retriever, mock, {}, StepClock{}, [&](const std::string& e) { events.push_back(e); });
    ChatSession session("s");
    const auto result = engine.answer(session, "ciao?");
    EXPECT_EQ(result.answer, "Non lo so.");
    EXPECT_TRUE(result.retrieved.empty());
    EXPECT_TRUE(result.turn.retrieved_refs.empty());
    ASSERT_EQ(events.size(), 1u);
    EXPECT_TRUE(mock->calls()[0].prompt.ends_with("Documenti: "));
}

TEST(RagEngine, AppendOnlyAndDeterministic) {
    auto stack = make_stack();
    std::vector<std::vector<ChatTurn>> transcripts;
    for (int run = 0; run < 3; ++run) {
        auto mock = routing_mock();
        RagEngine engine(stack.retriever, mock, {}, StepClock{});
        ChatSession session("s");
        for (const char* q : {"Come si pagano le tasse?", "E la segreteria?", "Chi insegna IA?"}) {
            const auto prefix = session.turns();
            engine.answer(session, q);
            ASSERT_TRUE(std::equal(prefix.begin(), prefix.end(), session.turns().begin()));
        }
        transcripts.push_back(session.turns());
    }
    EXPECT_EQ(transcripts[0], transcripts[1]);
    EXPECT_EQ(transcripts[1], transcripts[2]);
}

TEST(RagEngine, RejectsEmptyQuestion) {
    auto stack = make_stack();
    RagEngine engine(stack.retriever, routing_mock());
    ChatSession session("s");
    EXPECT_THROW(engine.answer(session, "   "), ValidationError);
    EXPECT_TRUE(session.empty());
}

TEST(RagEngine, GenerationFailureLeavesSessionUntouched) {
    auto stack = make_stack();
    auto mock = std::make_shared<MockProvider>(std::vector<ScriptEntry>{{PromptMatcher::any(), "offline", true, true}});
    RagEngine engine(stack.retriever, mock);
    ChatSession session("s");
    EXPECT_THROW(engine.answer(session, "tasse?"), ProviderError);
    EXPECT_TRUE(session.empty());
}

TEST(GenerationConfig, FromJson) {
    const auto cfg = GenerationConfig::from_json(nlohmann::json::parse(
        R"({"prompt_profile":"custom","deployment_prompt":true,"temperature":0,"max_new_tokens":256,"k":6})"));
    EXPECT_EQ(cfg.prompt_profile, PromptProfile::CustomOnly);
    EXPECT_TRUE(cfg.deployment_prompt);
    EXPECT_EQ(cfg.max_new_tokens, 256u);
    EXPECT_EQ(cfg.k, 6u);
    EXPECT_THROW(GenerationConfig::from_json(nlohmann::json::parse(R"({"temperature":-1})")), ValidationError);
    EXPECT_THROW(GenerationConfig::from_json(nlohmann::json::parse(R"({"prompt_profile":"x"})")), ValidationError);
    EXPECT_THROW(GenerationConfig::from_json(nlohmann::json::parse(R"({"k":0})")), ValidationError);
}

TEST(ExtractiveProvider, AnswersFromContextAndCondensesToFollowUp) {
    ExtractiveProvider p(1);
    const auto answer = p.generate(
        render_prompt(PromptSet::standard().custom, {{"question", "q"}, {"context", "Prima frase. Seconda."}}), {});
    EXPECT_EQ(answer, "Prima frase.");
    const auto second = p.generate(
        render_prompt(PromptSet::deployment().custom, {{"question", "q"}, {"context", "Altra frase! Dopo."}}), {});
    EXPECT_EQ(second, "Altra frase!");
    const auto condensed = p.generate(render_prompt(PromptSet::standard().condense,
                                                    {{"chat_history", "Utente: a\nAssistente: b"}, {"question", "c?"}}),
                                      {});
    EXPECT_EQ(condensed, "c?");
    EXPECT_EQ(p.generate(render_prompt(PromptSet::standard().custom, {{"question", "q"}, {"context", ""}}), {}),
              ExtractiveProvider::kFallback);
    EXPECT_EQ(ExtractiveProvider(5).generate("Documenti: uno due tre quattro.", {0.0, 2}), "uno due");
}
