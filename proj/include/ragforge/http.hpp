#pragma once

#include "ragforge/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <string>

namespace ragforge {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

/// Same, keeping the insertion order of keys.
inline void send_ordered_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"error", code}, {"message", message}});
}

inline nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) {
        return nlohmann::json::object();
    }
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) {
            throw ValidationError("request body must be a JSON object");
        }
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
    }
}

/// Runs a handler and maps library errors onto HTTP statuses.
inline httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ValidationError& e) {
            send_error(res, 400, "validation_error", e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "validation_error", e.what());
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ProviderError& e) {
            send_error(res, 503, "service_degraded", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal_error", e.what());
        }
    };
}

} // namespace detail

/// Registers the chat API on `server`. When `static_dir` is given it is served
/// at "/" for the browser client.
inline void mount_routes(httplib::Server& server, ChatService& service,
                         const std::optional<std::filesystem::path>& static_dir = std::nullopt) {
    using detail::guarded;
    using detail::send_json;

    server.Post("/sessions", guarded([&](const httplib::Request&, httplib::Response& res) {
                    send_json(res, 201, {{"session_id", service.create_session()}});
                }));

    server.Get(R"(/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
                   const auto session = service.session(req.matches[1]);
                   send_json(res, 200, {{"session_id", session.id()}, {"turns", session.turns()}});
               }));

    server.Post(R"(/sessions/([^/]+)/messages)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const auto body = detail::parse_body(req);
                    if (!body.contains("question") || !body["question"].is_string()) {
                        throw ValidationError("body needs a string field 'question'");
                    }
                    const auto r = service.post_message(req.matches[1], body["question"].get<std::string>());
                    send_json(res, 200, {{"answer", r.answer}, {"sources", r.sources}, {"turn", r.turn}});
                }));

    server.Post(R"(/sessions/([^/]+)/feedback)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const auto stored = service.post_feedback(req.matches[1], detail::parse_body(req).get<FeedbackRecord>());
                    send_json(res, 201, {{"status", "stored"}, {"feedback", stored}});
                }));

    server.Post(R"(/sessions/([^/]+)/turns/(\d+)/category)",
                guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const auto body = detail::parse_body(req);
                    const auto category = parse_question_category(body.at("category").get<std::string>());
                    const std::string digits = req.matches[2];
                    size_t turn = 0;
                    if (std::from_chars(digits.data(), digits.data() + digits.size(), turn).ec != std::errc{}) {
                        throw NotFoundError("no question " + digits + " in session '" + std::string(req.matches[1]) + "'");
                    }
                    service.tag_question(req.matches[1], turn, category);
                    send_json(res, 200, {{"status", "tagged"}, {"turn", turn}, {"category", to_string(category)}});
                }));

    server.Get("/stats", guarded([&](const httplib::Request&, httplib::Response& res) {
                   detail::send_ordered_json(res, 200, service.stats().to_json());
               }));

    server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, {{"status", "ok"}});
               }));

    if (static_dir) {
        if (!server.set_mount_point("/", static_dir->string())) {
            throw IoError("static directory " + static_dir->string() + " does not exist");
        }
    }
}

} // namespace ragforge
