#pragma once

#include "ragforge/error.hpp"

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ragforge {

enum class PromptKind { Custom, Condense };

using PromptBindings = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

/// Visits literal text and `{name}` placeholders in order. Braces that do not
/// enclose a lowercase identifier are literal.
template <typename OnText, typename OnSlot>
void scan_template(std::string_view body, OnText on_text, OnSlot on_slot) {
    size_t literal_start = 0;
    size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(body[j])) {
                ++j;
            }
            if (j < body.size() && body[j] == '}' && j > i + 1) {
                on_text(body.substr(literal_start, i - literal_start));
                on_slot(body.substr(i + 1, j - i - 1));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        ++i;
    }
    on_text(body.substr(literal_start));
}

} // namespace detail

inline std::set<std::string, std::less<>> placeholders(std::string_view body) {
    std::set<std::string, std::less<>> names;
    detail::scan_template(body, [](std::string_view) {}, [&](std::string_view name) { names.emplace(name); });
    return names;
}

/// Byte-exact substitution of every `{name}` slot.
inline std::string render_text(std::string_view body, const PromptBindings& bindings) {
    std::string out;
    out.reserve(body.size());
    detail::scan_template(
        body, [&](std::string_view text) { out += text; },
        [&](std::string_view name) {
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw ValidationError("missing binding for placeholder {" + std::string(name) + "}");
            }
            out += it->second;
        });
    return out;
}

class PromptTemplate {
public:
    PromptTemplate(PromptKind kind, std::string body) : kind_(kind), body_(std::move(body)) {
        static const std::set<std::string, std::less<>> known{"question", "context", "chat_history"};
        const auto names = placeholders(body_);
        for (const auto& name : names) {
            if (!known.contains(name)) {
                throw ValidationError("unknown placeholder {" + name + "} in prompt template");
            }
        }
        const std::vector<std::string> required = kind_ == PromptKind::Custom
                                                      ? std::vector<std::string>{"question", "context"}
                                                      : std::vector<std::string>{"chat_history", "question"};
        for (const auto& name : required) {
            if (!names.contains(name)) {
                throw ValidationError(std::string(kind_ == PromptKind::Custom ? "custom" : "condense") +
                                      " template lacks {" + name + "}");
            }
        }
    }

    PromptKind kind() const { return kind_; }
    const std::string& body() const { return body_; }

    std::string render(const PromptBindings& bindings) const { return render_text(body_, bindings); }

private:
    PromptKind kind_;
    std::string body_;
};

inline std::string render_prompt(const PromptTemplate& tmpl, const PromptBindings& bindings) {
    return tmpl.render(bindings);
}

namespace prompts {

// Shipped verbatim, including the original spelling of "succesiva".

inline constexpr const char* kCustom =
    "Sei unipa-gpt, il chatbot e assistente virtuale dell'Università degli Studi di Palermo.\n"
    "Rispondi cordialmente e in forma colloquiale alle domande che ti vengono poste.\n"
    "Se ricevi un saluto, rispondi salutando e presentandoti.\n"
    "Se ricevi una domanda riguardante l'università degli studi di Palermo,\n"
    "rispondi in base ai documenti che ti vengono dati insieme alla domanda.\n"
    "Se non sai rispondere, scusati e suggerisci di consultare il sito web, non inventare risposte.\n"
    "Question: {question}\n"
    "Documenti: {context}";

inline constexpr const char* kCondense =
    "Data la seguente conversazione e la domanda successiva, riformula la domanda successiva\n"
    "in modo tale sia una domanda singola.\n"
    "Conversazione: {chat_history}\n"
    "Domanda succesiva: {question}\n"
    "Domanda singola:";

/// Revised custom prompt used at the public deployment.
inline constexpr const char* kCustomDeployment =
    "Sono Unipa-GPT, chatbot e assistente virtuale dell'Università degli Studi di Palermo\n"
    "che risponde cordialmente e in forma colloquiale.\n"
    "Ai saluti, rispondi salutando e presentandoti;\n"
    "Rispondi alla domanda con la dicitura \"Risposta: \"\n"
    "Ricordati che il rettore dell'Università è il professore Massimo Midiri.\n"
    "Se la domanda riguarda l'università degli studi di Palermo,\n"
    "rispondi in base alle informazioni e riporta i link ad esse associate;\n"
    "Se non sai rispondere alla domanda, rispondi dicendo che sei un'intelligenza artificiale\n"
    "che ha ancora molto da imparare e suggerisci\n"
    "di andare su https://www.unipa.it/, non inventare risposte.\n"
    "Domanda: {question}\n"
    "Informazioni: {context}";

inline constexpr const char* kUserLabel = "Utente: ";
inline constexpr const char* kAssistantLabel = "Assistente: ";

} // namespace prompts

struct PromptSet {
    PromptTemplate custom;
    PromptTemplate condense;

    static PromptSet standard() {
        return {PromptTemplate(PromptKind::Custom, prompts::kCustom),
                PromptTemplate(PromptKind::Condense, prompts::kCondense)};
    }

    static PromptSet deployment() {
        return {PromptTemplate(PromptKind::Custom, prompts::kCustomDeployment),
                PromptTemplate(PromptKind::Condense, prompts::kCondense)};
    }

    static PromptSet for_profile(bool deployment_prompt) { return deployment_prompt ? deployment() : standard(); }
};

/// Retrieved texts in rank order, separated by one blank line.
inline std::string join_context(const std::vector<std::string>& texts) {
    std::string out;
    for (size_t i = 0; i < texts.size(); ++i) {
        if (i > 0) {
            out += "\n\n";
        }
        out += texts[i];
    }
    return out;
}

} // namespace ragforge
