#pragma once

#include "ragforge/chunker.hpp"
#include "ragforge/error.hpp"
#include "ragforge/io.hpp"
#include "ragforge/rag_engine.hpp"

#include "json.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace ragforge {

// ---------------------------------------------------------------------------
// Enumerations exchanged with clients by name

enum class QuestionCategory {
    GenericInformation,
    CoursesInformation,
    OtherUniversityRelated,
    OffTopic,
    ServicesAndStructures,
    TaxesAndScholarships,
    UniversityEnvironment,
};

enum class RespondentRole { SecondarySchoolStudent, UniversityStudent, Professor, Other };

enum class AnswerRating { Excellent, Good, Bad };

namespace detail {

template <typename E, size_t N>
const char* enum_name(E v, const std::array<const char*, N>& names) {
    return names.at(static_cast<size_t>(v));
}

template <typename E, size_t N>
E enum_parse(const std::string& s, const std::array<const char*, N>& names, const char* what) {
    for (size_t i = 0; i < N; ++i) {
        if (s == names[i]) {
            return static_cast<E>(i);
        }
    }
    std::string allowed;
    for (const char* n : names) {
        allowed += (allowed.empty() ? "" : "|") + std::string(n);
    }
    throw ValidationError(std::string("unknown ") + what + " '" + s + "' (expected " + allowed + ")");
}

inline constexpr std::array<const char*, 7> kCategoryNames{
    "GenericInformation", "CoursesInformation",  "OtherUniversityRelated", "OffTopic",
    "ServicesAndStructures", "TaxesAndScholarships", "UniversityEnvironment"};
inline constexpr std::array<const char*, 4> kRoleNames{"SecondarySchoolStudent", "UniversityStudent", "Professor",
                                                       "Other"};
inline constexpr std::array<const char*, 3> kRatingNames{"Excellent", "Good", "Bad"};

} // namespace detail

inline const char* to_string(QuestionCategory v) { return detail::enum_name(v, detail::kCategoryNames); }
inline const char* to_string(RespondentRole v) { return detail::enum_name(v, detail::kRoleNames); }
inline const char* to_string(AnswerRating v) { return detail::enum_name(v, detail::kRatingNames); }

inline QuestionCategory parse_question_category(const std::string& s) {
    return detail::enum_parse<QuestionCategory>(s, detail::kCategoryNames, "question category");
}
inline RespondentRole parse_respondent_role(const std::string& s) {
    return detail::enum_parse<RespondentRole>(s, detail::kRoleNames, "respondent role");
}
inline AnswerRating parse_answer_rating(const std::string& s) {
    return detail::enum_parse<AnswerRating>(s, detail::kRatingNames, "answer rating");
}

inline constexpr std::array<QuestionCategory, 7> kAllCategories{
    QuestionCategory::GenericInformation,    QuestionCategory::CoursesInformation,
    QuestionCategory::OtherUniversityRelated, QuestionCategory::OffTopic,
    QuestionCategory::ServicesAndStructures, QuestionCategory::TaxesAndScholarships,
    QuestionCategory::UniversityEnvironment};

// ---------------------------------------------------------------------------
// Records

struct FeedbackRecord {
    std::string session_id;
    RespondentRole respondent_role = RespondentRole::Other;
    int overall_rating = 0;
    std::vector<AnswerRating> per_answer_ratings;
    std::optional<std::string> comment;
    int64_t timestamp_ms = 0;

    friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

inline void to_json(nlohmann::json& j, const FeedbackRecord& f) {
    std::vector<std::string> ratings;
    for (auto r : f.per_answer_ratings) {
        ratings.emplace_back(to_string(r));
    }
    j = nlohmann::json{{"session_id", f.session_id},
                       {"respondent_role", to_string(f.respondent_role)},
                       {"overall_rating", f.overall_rating},
                       {"per_answer_ratings", ratings},
                       {"comment", f.comment ? nlohmann::json(*f.comment) : nlohmann::json(nullptr)},
                       {"timestamp_ms", f.timestamp_ms}};
}

/// Reads the client-supplied fields; session_id and timestamp are optional
/// because the service fills them in.
inline void from_json(const nlohmann::json& j, FeedbackRecord& f) {
    f.session_id = j.value("session_id", std::string{});
    f.respondent_role = parse_respondent_role(j.at("respondent_role").get<std::string>());
    f.overall_rating = j.at("overall_rating").get<int>();
    f.per_answer_ratings.clear();
    for (const auto& r : j.value("per_answer_ratings", std::vector<std::string>{})) {
        f.per_answer_ratings.push_back(parse_answer_rating(r));
    }
    f.comment.reset();
    if (j.contains("comment") && !j["comment"].is_null()) {
        f.comment = j["comment"].get<std::string>();
    }
    f.timestamp_ms = j.value("timestamp_ms", int64_t{0});
}

struct QuestionLogEntry {
    std::string session_id;
    size_t turn = 0; // 1-based within the session
    std::string question;
    std::optional<QuestionCategory> category;
    std::vector<std::string> retrieved_doc_ids;
    size_t answer_tokens = 0;
    int64_t latency_ms = 0;

    friend bool operator==(const QuestionLogEntry&, const QuestionLogEntry&) = default;
};

inline void to_json(nlohmann::json& j, const QuestionLogEntry& e) {
    j = nlohmann::json{{"session_id", e.session_id},
                       {"turn", e.turn},
                       {"question", e.question},
                       {"category", e.category ? nlohmann::json(to_string(*e.category)) : nlohmann::json(nullptr)},
                       {"retrieved_doc_ids", e.retrieved_doc_ids},
                       {"answer_tokens", e.answer_tokens},
                       {"latency_ms", e.latency_ms}};
}

struct UsageStats {
    std::map<std::string, size_t> categories; // the seven names plus "untagged"
    size_t total_questions = 0;
    size_t sessions = 0;
    size_t feedback = 0;
    std::map<std::string, size_t> ratings;         // "1".."5"
    std::map<std::string, size_t> roles;           // respondent roles
    std::map<std::string, size_t> answer_ratings;  // Excellent/Good/Bad

    size_t histogram_total() const {
        size_t sum = 0;
        for (const auto& [_, n] : categories) {
            sum += n;
        }
        return sum;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        nlohmann::ordered_json cats;
        for (auto c : kAllCategories) {
            cats[to_string(c)] = categories.at(to_string(c));
        }
        cats["untagged"] = categories.at("untagged");
        j["categories"] = cats;
        j["total_questions"] = total_questions;
        j["sessions"] = sessions;
        j["feedback"] = feedback;
        j["ratings"] = ratings;
        nlohmann::ordered_json role_counts;
        for (const char* r : detail::kRoleNames) {
            role_counts[r] = roles.at(r);
        }
        j["roles"] = role_counts;
        nlohmann::ordered_json answer_counts;
        for (const char* r : detail::kRatingNames) {
            answer_counts[r] = answer_ratings.at(r);
        }
        j["answer_ratings"] = answer_counts;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Persistence

/// Destination for state-changing records. append() must either durably
/// store the record or throw.
class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void append(const nlohmann::json& record) = 0;
};

class NullSink final : public RecordSink {
public:
    void append(const nlohmann::json&) override {}
};

/// Append-only line-delimited log on disk.
class FileRecordLog final : public RecordSink {
public:
    explicit FileRecordLog(std::filesystem::path path) : path_(std::move(path)) {
        if (path_.has_parent_path()) {
            std::filesystem::create_directories(path_.parent_path());
        }
        file_ = std::fopen(path_.c_str(), "ab");
        if (!file_) {
            throw IoError("cannot open record log " + path_.string());
        }
    }
    ~FileRecordLog() override {
        if (file_) {
            std::fclose(file_);
        }
    }
    FileRecordLog(const FileRecordLog&) = delete;
    FileRecordLog& operator=(const FileRecordLog&) = delete;

    void append(const nlohmann::json& record) override {
        const std::string line = record.dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
            throw IoError("write to record log " + path_.string() + " failed");
        }
    }

    /// Records in file order. A final line cut short by a crash (no newline,
    /// not parseable) is dropped; any other bad line is a FormatError.
    static std::vector<nlohmann::json> replay(const std::filesystem::path& path) {
        std::vector<nlohmann::json> out;
        if (!std::filesystem::exists(path)) {
            return out;
        }
        const std::string text = io::read_file(path);
        size_t start = 0, line_no = 0;
        while (start < text.size()) {
            ++line_no;
            const size_t end = text.find('\n', start);
            const bool complete = end != std::string::npos;
            const std::string line = text.substr(start, complete ? end - start : std::string::npos);
            start = complete ? end + 1 : text.size();
            if (trim(line).empty()) {
                continue;
            }
            try {
                out.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception& e) {
                if (!complete) {
                    break;
                }
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        return out;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
};

// ---------------------------------------------------------------------------
// Chat service

struct MessageResult {
    std::string answer;
    std::vector<std::string> sources;
    size_t turn = 0;
};

/// Sessions, question log and feedback over a RagEngine. Every mutation is
/// written to the sink before it becomes visible, so replaying the sink
/// rebuilds the same state.
class ChatService {
public:
    using Clock = std::function<int64_t()>;

    ChatService(std::shared_ptr<const RagEngine> engine, std::shared_ptr<RecordSink> sink = std::make_shared<NullSink>(),
                Clock clock = system_clock_ms)
        : engine_(std::move(engine)), sink_(std::move(sink)), clock_(std::move(clock)) {}

    /// Service backed by a record log file, replaying whatever it holds.
    static std::unique_ptr<ChatService> open(std::shared_ptr<const RagEngine> engine, const std::filesystem::path& log,
                                             Clock clock = system_clock_ms) {
        const auto records = FileRecordLog::replay(log);
        auto service = std::make_unique<ChatService>(std::move(engine), std::make_shared<NullSink>(), std::move(clock));
        service->replay(records);
        service->sink_ = std::make_shared<FileRecordLog>(log);
        return service;
    }

    void replay(const std::vector<nlohmann::json>& records) {
        std::unique_lock lock(state_mutex_);
        for (size_t i = 0; i < records.size(); ++i) {
            try {
                apply(records[i]);
            } catch (const Error& e) {
                throw FormatError("record " + std::to_string(i + 1) + ": " + e.what());
            } catch (const nlohmann::json::exception& e) {
                throw FormatError("record " + std::to_string(i + 1) + ": " + e.what());
            }
        }
    }

    std::string create_session() {
        std::unique_lock lock(state_mutex_);
        const std::string id = session_id_for(sessions_.size() + 1);
        commit(lock, {{"type", "session"}, {"id", id}, {"created_at_ms", clock_()}});
        return id;
    }

    MessageResult post_message(const std::string& session_id, const std::string& question) {
        auto slot = find_session(session_id);
        if (trim(question).empty()) {
            throw ValidationError("question must not be empty");
        }
        // Holding the session lock orders concurrent messages to one session;
        // other sessions proceed in parallel.
        std::lock_guard session_lock(slot->mutex);
        ChatSession snapshot;
        {
            std::shared_lock lock(state_mutex_);
            snapshot = slot->session;
        }
        const auto result = engine_->respond(snapshot, question);
        const size_t turn = snapshot.size() + 1;
        nlohmann::json record = result.turn;
        record["type"] = "turn";
        record["session"] = session_id;
        record["turn"] = turn;
        std::unique_lock lock(state_mutex_);
        commit(lock, record);
        return {result.turn.answer, result.turn.source_doc_ids, turn};
    }

    FeedbackRecord post_feedback(const std::string& session_id, FeedbackRecord record) {
        auto slot = find_session(session_id);
        record.session_id = session_id;
        record.timestamp_ms = clock_();
        std::unique_lock lock(state_mutex_);
        validate_feedback(record, slot->session.size());
        nlohmann::json j = record;
        j["type"] = "feedback";
        commit(lock, j);
        return record;
    }

    void tag_question(const std::string& session_id, size_t turn, QuestionCategory category) {
        std::unique_lock lock(state_mutex_);
        log_index(session_id, turn);
        commit(lock, {{"type", "tag"}, {"session", session_id}, {"turn", turn}, {"category", to_string(category)}});
    }

    UsageStats stats() const {
        std::shared_lock lock(state_mutex_);
        UsageStats s;
        for (auto c : kAllCategories) {
            s.categories[to_string(c)] = 0;
        }
        s.categories["untagged"] = 0;
        for (int r = 1; r <= 5; ++r) {
            s.ratings[std::to_string(r)] = 0;
        }
        for (const char* r : detail::kRoleNames) {
            s.roles[r] = 0;
        }
        for (const char* r : detail::kRatingNames) {
            s.answer_ratings[r] = 0;
        }
        for (const auto& e : log_) {
            ++s.categories[e.category ? to_string(*e.category) : "untagged"];
        }
        for (const auto& f : feedback_) {
            ++s.ratings[std::to_string(f.overall_rating)];
            ++s.roles[to_string(f.respondent_role)];
            for (auto r : f.per_answer_ratings) {
                ++s.answer_ratings[to_string(r)];
            }
        }
        s.total_questions = log_.size();
        s.sessions = sessions_.size();
        s.feedback = feedback_.size();
        return s;
    }

    ChatSession session(const std::string& id) const {
        auto slot = find_session(id);
        std::shared_lock lock(state_mutex_);
        return slot->session;
    }

    std::vector<QuestionLogEntry> question_log() const {
        std::shared_lock lock(state_mutex_);
        return log_;
    }

    std::vector<FeedbackRecord> feedback() const {
        std::shared_lock lock(state_mutex_);
        return feedback_;
    }

    size_t session_count() const {
        std::shared_lock lock(state_mutex_);
        return sessions_.size();
    }

    static std::string session_id_for(size_t n) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s-%06zu", n);
        return buf;
    }

    static void validate_feedback(const FeedbackRecord& f, size_t turns) {
        if (f.overall_rating < 1 || f.overall_rating > 5) {
            throw ValidationError("overall_rating must be between 1 and 5, got " + std::to_string(f.overall_rating));
        }
        if (f.per_answer_ratings.size() > turns) {
            throw ValidationError("per_answer_ratings has " + std::to_string(f.per_answer_ratings.size()) +
                                  " entries but the session has " + std::to_string(turns) + " turns");
        }
    }

private:
    struct SessionSlot {
        ChatSession session;
        std::mutex mutex;
    };

    std::shared_ptr<SessionSlot> find_session(const std::string& id) const {
        std::shared_lock lock(state_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) {
            throw NotFoundError("unknown session '" + id + "'");
        }
        return it->second;
    }

    size_t log_index(const std::string& session_id, size_t turn) const {
        auto it = log_by_turn_.find({session_id, turn});
        if (it == log_by_turn_.end()) {
            throw NotFoundError("no question " + std::to_string(turn) + " in session '" + session_id + "'");
        }
        return it->second;
    }

    /// Persist, then apply. Caller holds the exclusive state lock, which also
    /// makes this the single writer of the sink.
    void commit(std::unique_lock<std::shared_mutex>&, const nlohmann::json& record) {
        sink_->append(record);
        apply(record);
    }

    void apply(const nlohmann::json& r) {
        const std::string type = r.at("type").get<std::string>();
        if (type == "session") {
            const std::string id = r.at("id").get<std::string>();
            auto slot = std::make_shared<SessionSlot>();
            slot->session = ChatSession(id);
            if (!sessions_.emplace(id, std::move(slot)).second) {
                throw FormatError("duplicate session '" + id + "'");
            }
        } else if (type == "turn") {
            const std::string id = r.at("session").get<std::string>();
            auto it = sessions_.find(id);
            if (it == sessions_.end()) {
                throw NotFoundError("turn for unknown session '" + id + "'");
            }
            const ChatTurn turn = r.get<ChatTurn>();
            const size_t index = r.at("turn").get<size_t>();
            if (index != it->second->session.size() + 1) {
                throw FormatError("session '" + id + "' turn " + std::to_string(index) + " out of order");
            }
            it->second->session.append(turn);
            QuestionLogEntry entry;
            entry.session_id = id;
            entry.turn = index;
            entry.question = turn.question;
            entry.retrieved_doc_ids = turn.source_doc_ids;
            entry.answer_tokens = tokenize(turn.answer).size();
            entry.latency_ms = turn.answered_at_ms - turn.asked_at_ms;
            log_by_turn_[{id, index}] = log_.size();
            log_.push_back(std::move(entry));
        } else if (type == "feedback") {
            FeedbackRecord f = r.get<FeedbackRecord>();
            auto it = sessions_.find(f.session_id);
            if (it == sessions_.end()) {
                throw NotFoundError("feedback for unknown session '" + f.session_id + "'");
            }
            validate_feedback(f, it->second->session.size());
            feedback_.push_back(std::move(f));
        } else if (type == "tag") {
            const size_t i = log_index(r.at("session").get<std::string>(), r.at("turn").get<size_t>());
            log_[i].category = parse_question_category(r.at("category").get<std::string>());
        } else {
            throw FormatError("unknown record type '" + type + "'");
        }
    }

    std::shared_ptr<const RagEngine> engine_;
    std::shared_ptr<RecordSink> sink_;
    Clock clock_;

    mutable std::shared_mutex state_mutex_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    std::vector<QuestionLogEntry> log_;
    std::map<std::pair<std::string, size_t>, size_t> log_by_turn_;
    std::vector<FeedbackRecord> feedback_;
};

/// Stats straight from a record log without an engine (for offline reports).
inline UsageStats stats_from_log(const std::filesystem::path& log) {
    ChatService service(nullptr);
    service.replay(FileRecordLog::replay(log));
    return service.stats();
}

} // namespace ragforge
