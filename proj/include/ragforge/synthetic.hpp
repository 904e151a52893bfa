#pragma once

#include "ragforge/corpus.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ragforge::synthetic {

namespace detail {

template <size_t N>
const char* pick(std::mt19937_64& rng, const std::array<const char*, N>& words) {
    return words[rng() % N];
}

inline std::string padded(size_t n, int width) {
    std::string s = std::to_string(n);
    return std::string(width > static_cast<int>(s.size()) ? static_cast<size_t>(width) - s.size() : 0, '0') + s;
}

/// Fisher-Yates with raw engine output, so the permutation is the same on every standard library.
template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng() % i]);
    }
}

inline constexpr std::array<const char*, 12> kFields{
    "Ingegneria Informatica", "Ingegneria Meccanica", "Chimica",        "Giurisprudenza",
    "Medicina e Chirurgia",   "Scienze Biologiche",   "Architettura",   "Economia e Management",
    "Fisica",                 "Matematica",           "Lettere Moderne", "Scienze della Formazione"};
inline constexpr std::array<const char*, 8> kDepartments{
    "Ingegneria", "Scienze e Tecnologie Biologiche", "Giurisprudenza", "Medicina di Precisione",
    "Architettura", "Scienze Economiche",           "Fisica e Chimica", "Culture e Società"};
inline constexpr std::array<const char*, 6> kCurricula{"", "", "Generale", "Aeronautico", "Applicativo", "Teorico"};
inline constexpr std::array<const char*, 16> kSubjects{
    "Analisi Matematica", "Fisica Generale",    "Chimica Organica", "Diritto Privato",
    "Economia Aziendale", "Basi di Dati",       "Reti Logiche",     "Intelligenza Artificiale",
    "Meccanica Razionale", "Biologia Cellulare", "Statistica",       "Lingua Inglese",
    "Algoritmi",          "Termodinamica",      "Storia Moderna",   "Geometria"};
inline constexpr std::array<const char*, 10> kProfessors{"Rossi",  "Bianchi", "Gaglio",   "Ferrari", "Esposito",
                                                         "Romano", "Colombo", "Ricci",    "Marino",  "Greco"};
inline constexpr std::array<const char*, 2> kPeriods{"Primo semestre", "Secondo semestre"};
inline constexpr std::array<const char*, 6> kSectors{"ING-INF/05", "FIS/01", "CHIM/06", "IUS/01", "MAT/05", "BIO/13"};
inline constexpr std::array<const char*, 8> kTopics{
    "tasse universitarie", "borse di studio",     "immatricolazione", "calendario didattico",
    "segreteria studenti", "test di accesso",     "residenze",        "servizi per disabili"};
inline constexpr std::array<const char*, 6> kVerbs{"descrive", "riassume", "spiega", "illustra", "chiarisce",
                                                   "presenta"};

} // namespace detail

/// `count` courses whose class lists total `total_classes`; the remainder of the
/// even split goes to a seeded subset of courses.
inline std::vector<CourseRecord> courses(size_t count, size_t total_classes, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<size_t> class_counts(count, count == 0 ? 0 : total_classes / count);
    if (count > 0) {
        std::vector<size_t> order(count);
        for (size_t i = 0; i < count; ++i) {
            order[i] = i;
        }
        detail::shuffle(order, rng);
        for (size_t i = 0; i < total_classes % count; ++i) {
            ++class_counts[order[i]];
        }
    }

    std::vector<CourseRecord> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        CourseRecord c;
        c.course_id = "C" + detail::padded(i + 1, 4);
        c.level = rng() % 2 == 0 ? CourseLevel::Bachelor : CourseLevel::Master;
        c.name = std::string(detail::pick(rng, detail::kFields)) + " " + std::to_string(i + 1);
        c.department = detail::pick(rng, detail::kDepartments);
        c.curriculum = detail::pick(rng, detail::kCurricula);
        c.description = "Il corso di " + c.name + " forma laureati con una solida preparazione di base. " +
                        "Gli sbocchi professionali includono attività di ricerca e consulenza. " +
                        "La sede del corso è Palermo e la durata è di " +
                        (c.level == CourseLevel::Bachelor ? "3" : "2") + " anni.";
        const uint32_t years = c.level == CourseLevel::Bachelor ? 3 : 2;
        for (size_t k = 0; k < class_counts[i]; ++k) {
            ClassRecord cls;
            cls.class_name = std::string(detail::pick(rng, detail::kSubjects)) + " " + std::to_string(k + 1);
            cls.credits = static_cast<uint32_t>(3 + rng() % 10);
            cls.professor = detail::pick(rng, detail::kProfessors);
            cls.period = detail::pick(rng, detail::kPeriods);
            cls.sector = detail::pick(rng, detail::kSectors);
            cls.year = static_cast<uint32_t>(1 + (k * years) / std::max<size_t>(class_counts[i], 1));
            cls.objectives = "Lo studente acquisisce le conoscenze di " + cls.class_name + ". " +
                             "Il corso " + detail::pick(rng, detail::kVerbs) + " metodi e applicazioni.";
            c.classes.push_back(std::move(cls));
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<RawDocument> info_documents(size_t count, uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<RawDocument> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const std::string topic = detail::pick(rng, detail::kTopics);
        RawDocument d;
        d.doc_id = "info/" + detail::padded(i + 1, 3);
        d.section = Section::FutureStudents;
        d.kind = DocKind::Info;
        d.title = "Informazioni su " + topic + " " + std::to_string(i + 1);
        d.source_url = "https://www.unipa.it/futuri-studenti/" + detail::padded(i + 1, 3);
        d.text = "Questa pagina " + std::string(detail::pick(rng, detail::kVerbs)) + " le regole su " + topic +
                 ". Le domande si presentano dal 1 agosto al 30 settembre. " +
                 "Per maggiori informazioni contattare la segreteria studenti. " + "Documento numero " +
                 std::to_string(i + 1) + ".";
        out.push_back(std::move(d));
    }
    return out;
}

/// FAQ/manual pairs over the info documents; the first `validation_count` (in a
/// seeded order) are flagged for validation.
inline std::vector<FineTuneExample> faq_pairs(const std::vector<RawDocument>& info_docs, size_t count,
                                              size_t validation_count, uint64_t seed) {
    std::vector<FineTuneExample> out;
    if (info_docs.empty()) {
        return out;
    }
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const auto& doc = info_docs[i % info_docs.size()];
        FineTuneExample e;
        e.system_prompt = kFineTuneSystemPrompt;
        e.origin = i % 3 == 0 ? PairOrigin::Manual : PairOrigin::FaqExtracted;
        e.question = e.origin == PairOrigin::Manual ? "parlami di " + doc.title
                                                    : "Domanda frequente " + std::to_string(i + 1) + " su " + doc.title + "?";
        e.answer = doc.text;
        e.source_doc_id = doc.doc_id;
        out.push_back(std::move(e));
    }
    std::mt19937_64 rng(seed + 17);
    std::vector<size_t> order(count);
    for (size_t i = 0; i < count; ++i) {
        order[i] = i;
    }
    detail::shuffle(order, rng);
    for (size_t i = 0; i < std::min(validation_count, count); ++i) {
        out[order[i]].validation = true;
    }
    return out;
}

} // namespace ragforge::synthetic
