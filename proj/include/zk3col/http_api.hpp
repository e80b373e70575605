#pragma once

// HTTP/JSON binding of the session service. Requires httplib.h on the
// include path (vendored).

#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "zk3col/error.hpp"
#include "zk3col/service.hpp"

namespace zk3col::service {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
      return 400;
    case ErrorCode::forbidden: return 403;
    case ErrorCode::not_found: return 404;
    case ErrorCode::wrong_phase:
    case ErrorCode::sequence_gap:
      return 409;
    case ErrorCode::insufficient_data:
    case ErrorCode::protocol_violation:
      return 422;
    case ErrorCode::gated: return 423;
    default: return 500;
  }
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), {{"code", to_string(code)}, {"message", message}});
}

inline json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::parse_error, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed JSON: ") + e.what());
  }
}

// Token from the X-Role-Token header, the query string, or the body.
inline std::string token_of(const httplib::Request& req, const json& body = json::object()) {
  if (req.has_header("X-Role-Token")) return req.get_header_value("X-Role-Token");
  if (req.has_param("token")) return req.get_param_value("token");
  return body.value("token", std::string{});
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, ErrorCode::invalid_argument, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::io_error, e.what());
    }
  };
}

inline std::uint64_t uint_param(const httplib::Request& req, const char* name, std::uint64_t fallback) {
  if (!req.has_param(name)) return fallback;
  try {
    return std::stoull(req.get_param_value(name));
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("bad query parameter ") + name);
  }
}

}  // namespace detail

inline constexpr std::uint64_t kMaxLongPollMs = 30000;

inline void mount_routes(httplib::Server& srv, SessionManager& mgr) {
  using detail::guarded;
  using detail::send_json;

  srv.Post("/sessions", guarded([&mgr](const auto& req, auto& res) {
             send_json(res, 201, mgr.create_session(detail::body_json(req)));
           }));
  srv.Get("/sessions/:id", guarded([&mgr](const auto& req, auto& res) {
            send_json(res, 200, mgr.get_session(req.path_params.at("id"), detail::token_of(req)));
          }));
  srv.Post("/sessions/:id/actions", guarded([&mgr](const auto& req, auto& res) {
             const auto body = detail::body_json(req);
             send_json(res, 200, mgr.post_action(req.path_params.at("id"), detail::token_of(req, body), body));
           }));
  srv.Get("/sessions/:id/events", guarded([&mgr](const auto& req, auto& res) {
            const auto after = detail::uint_param(req, "after", 0);
            const auto wait = std::min(detail::uint_param(req, "wait_ms", 0), kMaxLongPollMs);
            send_json(res, 200,
                      mgr.stream_events(req.path_params.at("id"), detail::token_of(req), after,
                                        std::chrono::milliseconds(wait)));
          }));
  srv.Post("/experiments", guarded([&mgr](const auto& req, auto& res) {
             send_json(res, 201, mgr.create_experiment(detail::body_json(req)));
           }));
  srv.Get("/experiments/:id", guarded([&mgr](const auto& req, auto& res) {
            send_json(res, 200, mgr.get_experiment(req.path_params.at("id")));
          }));
  srv.Post("/experiments/:id/input", guarded([&mgr](const auto& req, auto& res) {
             auto body = detail::body_json(req);
             if (!body.contains("token")) body["token"] = detail::token_of(req);
             send_json(res, 200, mgr.experiment_input(req.path_params.at("id"), body));
           }));
  srv.Get("/reports/:id", guarded([&mgr](const auto& req, auto& res) {
            const bool attack = req.has_param("attack") && req.get_param_value("attack") != "0";
            send_json(res, 200, mgr.get_report(req.path_params.at("id"), attack));
          }));
  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, {{"ok", true}});
  });
}

}  // namespace zk3col::service
