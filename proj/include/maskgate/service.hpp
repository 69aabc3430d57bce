#pragma once

// Local HTTP surface of the gateway. Runs on the user's machine; callers are
// local applications that want masking without linking the library.
//
//   GET  /healthz              -> {"status":"ok", ...}
//   POST /v1/sanitize          {user_id, text[, real_name]} -> masked text + applied masks
//   POST /v1/restore           {user_id, text}              -> original text
//   POST /v1/chat              {user_id, message[, real_name]} -> full gateway turn
//
// Malformed requests get 400, inputs refused by the gateway precondition get
// 422, upstream (cloud) failures get 502; every error body is {"error": ...}.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <maskgate/gateway.hpp>

namespace maskgate {

struct ServiceOptions {
  MaskStrategy strategy = MaskStrategy::typed_reversible;
  PrivacyLevel min_level = PrivacyLevel::PL2;
};

class GatewayService {
 public:
  GatewayService(const Extractor& extractor, MappingStore& store, CloudAgentClient& cloud,
                 ServiceOptions options = {})
      : extractor_(extractor),
        store_(store),
        options_(options),
        sanitizer_(options.strategy, &store, &session_, options.min_level),
        gateway_(extractor, store, cloud, GatewayOptions{options.strategy, options.min_level}) {
    register_routes();
  }

  httplib::Server& server() { return server_; }

  // Blocking serve loop (used by the CLI).
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  // Binds an ephemeral port and serves on a background thread (used by tests).
  int start_async(const std::string& host = "127.0.0.1") {
    int port = server_.bind_to_any_port(host);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  ~GatewayService() { stop(); }

 private:
  static void reply(httplib::Response& res, int status, const nlohmann::ordered_json& j) {
    res.status = status;
    res.set_content(j.dump(2), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, nlohmann::ordered_json{{"error", message}});
  }

  // Parses the body as a JSON object and pulls required string fields;
  // returns nullopt after writing the 400 response when anything is off.
  static std::optional<nlohmann::json> parse_body(const httplib::Request& req,
                                                  httplib::Response& res,
                                                  std::initializer_list<const char*> required) {
    nlohmann::json j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      reply_error(res, 400, "body must be a JSON object");
      return std::nullopt;
    }
    for (const char* field : required) {
      if (!j.contains(field) || !j[field].is_string()) {
        reply_error(res, 400, std::string("missing string field: ") + field);
        return std::nullopt;
      }
    }
    return j;
  }

  static std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
    if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
    return std::nullopt;
  }

  void register_routes() {
    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::ordered_json j;
      j["status"] = "ok";
      j["strategy"] = to_string(options_.strategy);
      j["mappings"] = store_.size();
      reply(res, 200, j);
    });

    server_.Post("/v1/sanitize", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res, {"user_id", "text"});
      if (!body) return;
      std::lock_guard<std::mutex> lock(mu_);
      try {
        auto user_id = (*body)["user_id"].get<std::string>();
        auto text = (*body)["text"].get<std::string>();
        auto items = extractor_.extract(text, optional_string(*body, "real_name"));
        auto s = sanitizer_.sanitize(user_id, text, items);
        nlohmann::ordered_json j;
        j["user_id"] = user_id;
        j["strategy"] = to_string(s.strategy);
        j["text"] = s.text;
        j["applied"] = nlohmann::ordered_json::array();
        for (const auto& m : s.applied) {
          j["applied"].push_back({{"token", m.token},
                                  {"original_value", m.original_value},
                                  {"type_slug", m.type_slug},
                                  {"privacy_level", to_string(m.privacy_level)},
                                  {"occurrences", m.occurrences}});
        }
        j["warnings"] = s.warnings;
        reply(res, 200, j);
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });

    server_.Post("/v1/restore", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res, {"user_id", "text"});
      if (!body) return;
      try {
        auto r = restore_text(store_, (*body)["user_id"].get<std::string>(),
                              (*body)["text"].get<std::string>());
        nlohmann::ordered_json j;
        j["text"] = r.text;
        j["resolved"] = r.resolved;
        j["unresolved"] = r.unresolved;
        reply(res, 200, j);
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });

    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res, {"user_id", "message"});
      if (!body) return;
      std::lock_guard<std::mutex> lock(mu_);
      try {
        auto user_id = (*body)["user_id"].get<std::string>();
        auto audit = gateway_.process_turn(user_id, (*body)["message"].get<std::string>(),
                                           optional_string(*body, "real_name"));
        if (audit.rejected) {
          reply_error(res, 422, audit.error);
          return;
        }
        if (!audit.error.empty()) {
          reply_error(res, 502, audit.error);
          return;
        }
        nlohmann::ordered_json j;
        j["user_id"] = user_id;
        j["strategy"] = to_string(audit.strategy);
        j["response"] = audit.restored.text;
        j["sanitized_message"] = audit.sanitized.text;
        j["masked_values"] = audit.sanitized.applied.size();
        j["resolved_tokens"] = audit.restored.resolved;
        j["unresolved_tokens"] = audit.restored.unresolved;
        j["warnings"] = audit.sanitized.warnings;
        reply(res, 200, j);
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    });
  }

  const Extractor& extractor_;
  MappingStore& store_;
  ServiceOptions options_;
  UntypedMaskSession session_;
  Sanitizer sanitizer_;
  Gateway gateway_;
  httplib::Server server_;
  std::thread thread_;
  std::mutex mu_;  // gateway and sanitizer state are not thread-safe
};

}  // namespace maskgate
