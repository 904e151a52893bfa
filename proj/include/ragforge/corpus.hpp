#pragma once

#include "ragforge/error.hpp"
#include "ragforge/io.hpp"
#include "ragforge/llm.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ragforge {

enum class CourseLevel { Bachelor, Master };
enum class Section { Education, FutureStudents };
enum class DocKind { Details, Outline, ClassObjectives, Info };
enum class CorpusVariant { Clear, Full, Emb };
enum class PairOrigin { AutoDetails, AutoOutline, FaqExtracted, Manual };

inline const char* to_string(CourseLevel v) { return v == CourseLevel::Bachelor ? "Bachelor" : "Master"; }
inline const char* to_string(Section v) { return v == Section::Education ? "Education" : "FutureStudents"; }

inline const char* to_string(DocKind v) {
    switch (v) {
    case DocKind::Details: return "Details";
    case DocKind::Outline: return "Outline";
    case DocKind::ClassObjectives: return "ClassObjectives";
    case DocKind::Info: return "Info";
    }
    return "?";
}

inline const char* to_string(CorpusVariant v) {
    switch (v) {
    case CorpusVariant::Clear: return "clear";
    case CorpusVariant::Full: return "full";
    case CorpusVariant::Emb: return "emb";
    }
    return "?";
}

inline const char* to_string(PairOrigin v) {
    switch (v) {
    case PairOrigin::AutoDetails: return "AutoDetails";
    case PairOrigin::AutoOutline: return "AutoOutline";
    case PairOrigin::FaqExtracted: return "FaqExtracted";
    case PairOrigin::Manual: return "Manual";
    }
    return "?";
}

namespace detail {

template <typename Enum, size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, const char* what) {
    for (Enum v : values) {
        if (text == to_string(v)) {
            return v;
        }
    }
    throw ValidationError(std::string("unknown ") + what + ": '" + text + "'");
}

} // namespace detail

inline CourseLevel parse_course_level(const std::string& s) {
    return detail::parse_enum(s, std::array{CourseLevel::Bachelor, CourseLevel::Master}, "course level");
}
inline Section parse_section(const std::string& s) {
    return detail::parse_enum(s, std::array{Section::Education, Section::FutureStudents}, "section");
}
inline DocKind parse_doc_kind(const std::string& s) {
    return detail::parse_enum(
        s, std::array{DocKind::Details, DocKind::Outline, DocKind::ClassObjectives, DocKind::Info}, "document kind");
}
inline CorpusVariant parse_variant(const std::string& s) {
    return detail::parse_enum(s, std::array{CorpusVariant::Clear, CorpusVariant::Full, CorpusVariant::Emb},
                              "corpus variant");
}
inline PairOrigin parse_origin(const std::string& s) {
    return detail::parse_enum(
        s, std::array{PairOrigin::AutoDetails, PairOrigin::AutoOutline, PairOrigin::FaqExtracted, PairOrigin::Manual},
        "pair origin");
}

struct ClassRecord {
    std::string class_name;
    uint32_t credits = 0;
    std::string professor;
    std::string period;
    std::string sector;
    uint32_t year = 1;
    std::string objectives;

    friend bool operator==(const ClassRecord&, const ClassRecord&) = default;
};

struct CourseRecord {
    std::string course_id;
    std::string name;
    CourseLevel level = CourseLevel::Bachelor;
    std::string department;
    std::string curriculum;
    std::string description;
    std::vector<ClassRecord> classes;

    friend bool operator==(const CourseRecord&, const CourseRecord&) = default;
};

/// A flat corpus document. `course_id` and `title` are empty for Info documents.
struct RawDocument {
    std::string doc_id;
    Section section = Section::FutureStudents;
    DocKind kind = DocKind::Info;
    std::string text;
    std::string source_url;
    std::string course_id;
    std::string title;

    friend bool operator==(const RawDocument&, const RawDocument&) = default;
};

struct FineTuneExample {
    std::string system_prompt;
    std::string question;
    std::string answer;
    PairOrigin origin = PairOrigin::Manual;
    std::string source_doc_id;
    /// Set for Education pairs; groups Details/Outline pairs of one course.
    std::string course_id;
    /// FutureStudents pairs flagged for the validation split.
    bool validation = false;

    friend bool operator==(const FineTuneExample&, const FineTuneExample&) = default;
};

/// The exported projection of a FineTuneExample.
struct FineTuneRecord {
    std::string system;
    std::string question;
    std::string answer;

    friend bool operator==(const FineTuneRecord&, const FineTuneRecord&) = default;
};

// ---------------------------------------------------------------------------
// JSON mapping

inline void to_json(nlohmann::json& j, const ClassRecord& c) {
    j = nlohmann::json{{"class_name", c.class_name}, {"credits", c.credits}, {"professor", c.professor},
                       {"period", c.period},         {"sector", c.sector},   {"year", c.year},
                       {"objectives", c.objectives}};
}

inline void from_json(const nlohmann::json& j, ClassRecord& c) {
    c.class_name = j.at("class_name").get<std::string>();
    const auto credits = j.at("credits").get<int64_t>();
    if (credits < 0) {
        throw ValidationError("class '" + c.class_name + "': credits must be non-negative");
    }
    c.credits = static_cast<uint32_t>(credits);
    c.professor = j.value("professor", "");
    c.period = j.value("period", "");
    c.sector = j.value("sector", "");
    const auto year = j.at("year").get<int64_t>();
    if (year < 1) {
        throw ValidationError("class '" + c.class_name + "': year must be >= 1");
    }
    c.year = static_cast<uint32_t>(year);
    c.objectives = j.value("objectives", "");
}

inline void to_json(nlohmann::json& j, const CourseRecord& c) {
    j = nlohmann::json{{"course_id", c.course_id},   {"name", c.name},
                       {"level", to_string(c.level)}, {"department", c.department},
                       {"curriculum", c.curriculum}, {"description", c.description},
                       {"classes", c.classes}};
}

inline void from_json(const nlohmann::json& j, CourseRecord& c) {
    c.course_id = j.at("course_id").get<std::string>();
    c.name = j.at("name").get<std::string>();
    c.level = parse_course_level(j.at("level").get<std::string>());
    c.department = j.value("department", "");
    c.curriculum = j.value("curriculum", "");
    c.description = j.value("description", "");
    c.classes = j.value("classes", std::vector<ClassRecord>{});
}

inline void to_json(nlohmann::json& j, const RawDocument& d) {
    j = nlohmann::json{{"doc_id", d.doc_id},         {"section", to_string(d.section)},
                       {"kind", to_string(d.kind)},   {"text", d.text},
                       {"source_url", d.source_url}, {"course_id", d.course_id},
                       {"title", d.title}};
}

inline void from_json(const nlohmann::json& j, RawDocument& d) {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.section = parse_section(j.at("section").get<std::string>());
    d.kind = parse_doc_kind(j.at("kind").get<std::string>());
    d.text = j.at("text").get<std::string>();
    d.source_url = j.value("source_url", "");
    d.course_id = j.value("course_id", "");
    d.title = j.value("title", "");
    if (d.text.empty()) {
        throw ValidationError("document '" + d.doc_id + "' has empty text");
    }
}

inline void to_json(nlohmann::json& j, const FineTuneExample& e) {
    j = nlohmann::json{{"system", e.system_prompt},       {"question", e.question},
                       {"answer", e.answer},              {"origin", to_string(e.origin)},
                       {"source_doc_id", e.source_doc_id}, {"course_id", e.course_id},
                       {"validation", e.validation}};
}

inline void from_json(const nlohmann::json& j, FineTuneExample& e) {
    e.system_prompt = j.at("system").get<std::string>();
    e.question = j.at("question").get<std::string>();
    e.answer = j.at("answer").get<std::string>();
    e.origin = parse_origin(j.value("origin", "Manual"));
    e.source_doc_id = j.value("source_doc_id", "");
    e.course_id = j.value("course_id", "");
    e.validation = j.value("validation", false);
}

/// Parses one JSON object per non-blank line; errors carry the 1-based line number.
template <typename T>
std::vector<T> parse_records(const std::vector<std::string>& lines, const std::string& origin) {
    std::vector<T> out;
    out.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
        try {
            out.push_back(nlohmann::json::parse(lines[i]).get<T>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
std::vector<T> load_records(const std::filesystem::path& path) {
    return parse_records<T>(io::read_records(path), path.string());
}

template <typename T>
std::string format_records(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += nlohmann::json(item).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<CourseRecord> load_courses(const std::filesystem::path& path) {
    return load_records<CourseRecord>(path);
}

inline std::vector<RawDocument> load_documents(const std::filesystem::path& path) {
    return load_records<RawDocument>(path);
}

// ---------------------------------------------------------------------------
// Variant rendering

inline std::string details_doc_id(const CourseRecord& c) { return c.course_id + "/details"; }
inline std::string outline_doc_id(const CourseRecord& c) { return c.course_id + "/outline"; }
inline std::string objectives_doc_id(const CourseRecord& c, size_t class_index) {
    return c.course_id + "/objectives/" + std::to_string(class_index + 1);
}

inline std::string course_title(const CourseRecord& c) {
    return c.curriculum.empty() ? c.name : c.name + " (" + c.curriculum + ")";
}

inline std::string render_details(const CourseRecord& c) {
    std::ostringstream out;
    out << "Corso di studio: " << c.name << '\n'
        << "Tipologia: " << (c.level == CourseLevel::Bachelor ? "Laurea" : "Laurea Magistrale") << '\n'
        << "Dipartimento: " << c.department << '\n';
    if (!c.curriculum.empty()) {
        out << "Curriculum: " << c.curriculum << '\n';
    }
    if (!c.description.empty()) {
        out << '\n' << c.description << '\n';
    }
    return out.str();
}

/// Outline without objectives, classes grouped by year in input order.
inline std::string render_outline_clear(const CourseRecord& c) {
    std::ostringstream out;
    out << "Piano di studi: " << course_title(c) << '\n';
    std::vector<size_t> order(c.classes.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return c.classes[a].year < c.classes[b].year; });
    uint32_t current_year = 0;
    for (size_t i : order) {
        const auto& cls = c.classes[i];
        if (cls.year != current_year) {
            current_year = cls.year;
            out << "\nAnno " << current_year << '\n';
        }
        out << "- " << cls.class_name << " | CFU: " << cls.credits << " | Docente: " << cls.professor
            << " | Periodo: " << cls.period << " | SSD: " << cls.sector << '\n';
    }
    return out.str();
}

/// Clear outline followed by every class's objectives; the clear outline is a prefix.
inline std::string render_outline_emb(const CourseRecord& c) {
    std::string out = render_outline_clear(c);
    if (c.classes.empty()) {
        return out;
    }
    out += "\nObiettivi formativi\n";
    for (const auto& cls : c.classes) {
        out += "- " + cls.class_name + ": " + cls.objectives + '\n';
    }
    return out;
}

inline std::string render_class_objectives(const CourseRecord& c, const ClassRecord& cls) {
    return "Insegnamento: " + cls.class_name + "\nCorso di studio: " + course_title(c) +
           "\nObiettivi formativi: " + cls.objectives + '\n';
}

/// Renders the course records plus pass-through info documents as one corpus variant.
inline std::vector<RawDocument> build_variant(const std::vector<CourseRecord>& courses,
                                              const std::vector<RawDocument>& info_docs, CorpusVariant variant) {
    std::unordered_set<std::string> course_ids;
    for (const auto& c : courses) {
        if (!course_ids.insert(c.course_id).second) {
            throw ValidationError("duplicate course_id: " + c.course_id);
        }
        if (variant != CorpusVariant::Clear) {
            for (const auto& cls : c.classes) {
                if (cls.objectives.empty()) {
                    throw ValidationError("course " + c.course_id + ", class '" + cls.class_name +
                                          "': objectives required for the " + to_string(variant) + " variant");
                }
            }
        }
    }
    for (const auto& doc : info_docs) {
        if (doc.section != Section::FutureStudents || doc.kind != DocKind::Info) {
            throw ValidationError("info document " + doc.doc_id + " must be a FutureStudents/Info document");
        }
    }

    std::vector<RawDocument> docs;
    for (const auto& c : courses) {
        const std::string title = course_title(c);
        docs.push_back({details_doc_id(c), Section::Education, DocKind::Details, render_details(c), "", c.course_id,
                        title});
        docs.push_back({outline_doc_id(c), Section::Education, DocKind::Outline,
                        variant == CorpusVariant::Emb ? render_outline_emb(c) : render_outline_clear(c), "",
                        c.course_id, title});
        if (variant == CorpusVariant::Full) {
            for (size_t i = 0; i < c.classes.size(); ++i) {
                docs.push_back({objectives_doc_id(c, i), Section::Education, DocKind::ClassObjectives,
                                render_class_objectives(c, c.classes[i]), "", c.course_id, title});
            }
        }
    }
    docs.insert(docs.end(), info_docs.begin(), info_docs.end());

    std::unordered_set<std::string> doc_ids;
    for (const auto& doc : docs) {
        if (!doc_ids.insert(doc.doc_id).second) {
            throw ValidationError("duplicate doc_id: " + doc.doc_id);
        }
    }
    return docs;
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
    /// Every (section, kind) pair, in enum order, including zero rows.
    std::vector<std::pair<std::pair<Section, DocKind>, size_t>> by_kind;
    size_t education = 0;
    size_t future_students = 0;
    size_t total = 0;

    size_t count(Section s, DocKind k) const {
        for (const auto& [key, n] : by_kind) {
            if (key.first == s && key.second == k) {
                return n;
            }
        }
        return 0;
    }

    std::string to_table() const {
        std::ostringstream out;
        for (const auto& [key, n] : by_kind) {
            out << to_string(key.first) << '\t' << to_string(key.second) << '\t' << n << '\n';
        }
        out << "Education\t*\t" << education << '\n'
            << "FutureStudents\t*\t" << future_students << '\n'
            << "Total\t*\t" << total << '\n';
        return out.str();
    }
};

inline CorpusStats corpus_stats(const std::vector<RawDocument>& docs) {
    CorpusStats stats;
    for (Section s : {Section::Education, Section::FutureStudents}) {
        for (DocKind k : {DocKind::Details, DocKind::Outline, DocKind::ClassObjectives, DocKind::Info}) {
            stats.by_kind.push_back({{s, k}, 0});
        }
    }
    for (const auto& doc : docs) {
        const size_t slot = static_cast<size_t>(doc.section) * 4 + static_cast<size_t>(doc.kind);
        ++stats.by_kind[slot].second;
        (doc.section == Section::Education ? stats.education : stats.future_students) += 1;
    }
    stats.total = docs.size();
    return stats;
}

// ---------------------------------------------------------------------------
// Fine-tuning pairs

inline constexpr const char* kFineTuneSystemPrompt =
    "Sei unipa-gpt, il chatbot e assistente virtuale dell'Università degli Studi di Palermo. "
    "Rispondi cordialmente e in forma colloquiale alle domande che ti vengono poste.";

inline std::string describe_course_question(const std::string& title) {
    return "Descrivi il corso di studio " + title + ".";
}

inline std::string course_topics_question(const std::string& title) {
    return "Quali sono gli argomenti del corso di studio " + title + "?";
}

/// Prompt handed to the pair generator: the source document, a blank line, then the question.
inline std::string pair_generation_prompt(const RawDocument& doc, const std::string& question) {
    return doc.text + "\n\nDomanda: " + question;
}

struct GenerationFailure {
    std::string doc_id;
    std::string message;
};

struct FineTunePairs {
    std::vector<FineTuneExample> examples;
    std::vector<GenerationFailure> failures;
};

/// One generated pair per Details and Outline document (Clear variant), then the
/// supplied FAQ/manual pairs unchanged. Info documents are not used here.
inline FineTunePairs generate_finetune_pairs(const std::vector<RawDocument>& docs, LLMProvider& generator,
                                             const std::vector<FineTuneExample>& faq_pairs,
                                             const std::string& system_prompt = kFineTuneSystemPrompt) {
    FineTunePairs result;
    for (const auto& doc : docs) {
        if (doc.kind == DocKind::ClassObjectives) {
            throw ValidationError("fine-tune pairs are generated from the clear variant; found ClassObjectives document " +
                                  doc.doc_id);
        }
        if (doc.kind != DocKind::Details && doc.kind != DocKind::Outline) {
            continue;
        }
        const bool details = doc.kind == DocKind::Details;
        const std::string title = doc.title.empty() ? doc.course_id : doc.title;
        std::string question = details ? describe_course_question(title) : course_topics_question(title);
        try {
            std::string answer = generator.generate(pair_generation_prompt(doc, question), GenerationParams{});
            if (answer.empty()) {
                throw ProviderError("empty answer");
            }
            result.examples.push_back({system_prompt, std::move(question), std::move(answer),
                                       details ? PairOrigin::AutoDetails : PairOrigin::AutoOutline, doc.doc_id,
                                       doc.course_id, false});
        } catch (const Error& e) {
            result.failures.push_back({doc.doc_id, e.what()});
        }
    }
    for (const auto& pair : faq_pairs) {
        if (pair.system_prompt.empty() || pair.question.empty() || pair.answer.empty()) {
            throw ValidationError("FAQ pair from " + pair.source_doc_id + " has an empty field");
        }
        result.examples.push_back(pair);
    }
    return result;
}

struct ValidationSplit {
    std::vector<FineTuneExample> train;
    std::vector<FineTuneExample> valid;
};

inline bool is_education_pair(const FineTuneExample& e) {
    return e.origin == PairOrigin::AutoDetails || e.origin == PairOrigin::AutoOutline;
}

/// Picks one Education pair per course (seeded) plus every flagged FutureStudents
/// pair for validation. Both outputs keep input order.
inline ValidationSplit split_validation(const std::vector<FineTuneExample>& pairs, uint64_t seed) {
    std::vector<std::string> course_order;
    std::unordered_map<std::string, std::vector<size_t>> by_course;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (!is_education_pair(p)) {
            continue;
        }
        if (p.course_id.empty()) {
            throw ValidationError("education pair for " + p.source_doc_id + " has no course_id");
        }
        auto [it, inserted] = by_course.try_emplace(p.course_id);
        if (inserted) {
            course_order.push_back(p.course_id);
        }
        it->second.push_back(i);
    }

    std::vector<bool> to_valid(pairs.size(), false);
    std::mt19937_64 rng(seed);
    for (const auto& course : course_order) {
        const auto& members = by_course[course];
        to_valid[members[rng() % members.size()]] = true;
    }
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (!is_education_pair(pairs[i]) && pairs[i].validation) {
            to_valid[i] = true;
        }
    }

    ValidationSplit split;
    for (size_t i = 0; i < pairs.size(); ++i) {
        (to_valid[i] ? split.valid : split.train).push_back(pairs[i]);
    }
    return split;
}

inline FineTuneRecord to_record(const FineTuneExample& e) { return {e.system_prompt, e.question, e.answer}; }

/// One {"system","question","answer"} object per line, keys in that order, LF endings.
inline std::string format_finetune(const std::vector<FineTuneExample>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        if (p.system_prompt.empty() || p.question.empty() || p.answer.empty()) {
            throw ValidationError("fine-tune pair from " + p.source_doc_id + " has an empty field");
        }
        nlohmann::ordered_json j;
        j["system"] = p.system_prompt;
        j["question"] = p.question;
        j["answer"] = p.answer;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline size_t export_finetune(const std::vector<FineTuneExample>& pairs, const std::filesystem::path& destination) {
    const std::string content = format_finetune(pairs);
    io::atomic_write(destination, content);
    return content.size();
}

inline std::vector<FineTuneRecord> parse_finetune(std::string_view content, const std::string& origin = "<memory>") {
    std::vector<FineTuneRecord> out;
    const auto lines = io::split_records(content);
    for (size_t i = 0; i < lines.size(); ++i) {
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            out.push_back({j.at("system").get<std::string>(), j.at("question").get<std::string>(),
                           j.at("answer").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<FineTuneRecord> import_finetune(const std::filesystem::path& source) {
    return parse_finetune(io::read_file(source), source.string());
}

} // namespace ragforge
