#pragma once

// HTTP adapters for a chat-completions style cloud endpoint: a
// CloudAgentClient that sends the (already sanitized) conversation out, and
// an Extractor that delegates privacy-span detection to a remote model.
// Retries with exponential backoff cover connection failures, 429 and 5xx;
// other HTTP errors fail fast.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <maskgate/extract.hpp>
#include <maskgate/gateway.hpp>

namespace maskgate {

struct RemoteConfig {
  std::string endpoint = "http://127.0.0.1:8080";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key;       // sent as "Authorization: Bearer <key>" when set
  std::string model = "cloud-agent";
  double temperature = 0.0;
  int timeout_seconds = 30;
  int max_retries = 2;       // attempts beyond the first
  int backoff_ms = 250;      // doubled after each retry
};

class RemoteCloudClient final : public CloudAgentClient {
 public:
  explicit RemoteCloudClient(RemoteConfig config) : config_(std::move(config)) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    nlohmann::ordered_json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : messages)
      body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = config_.temperature;
    return post_chat(body.dump());
  }

  const RemoteConfig& config() const { return config_; }

 private:
  std::string post_chat(const std::string& payload) {
    std::string last_error;
    int backoff = config_.backoff_ms;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      httplib::Client client(config_.endpoint);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(config_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw GatewayError("cloud endpoint returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
      }
      return parse_completion(res->body);
    }
    throw GatewayError("cloud endpoint unreachable after " +
                       std::to_string(config_.max_retries + 1) + " attempts (" + last_error + ")");
  }

  static std::string parse_completion(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw GatewayError("cloud response is not valid JSON");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw GatewayError("cloud response missing choices[0].message.content");
    }
  }

  RemoteConfig config_;
};

// Extractor that asks a remote model for privacy spans. The model's output
// is parsed strictly; items whose text does not actually occur in the message
// are dropped (and counted) instead of poisoning the sanitizer.
class RemoteExtractor final : public Extractor {
 public:
  RemoteExtractor(RemoteCloudClient& client, std::string prompt_template)
      : client_(client), template_(std::move(prompt_template)) {
    if (template_.empty()) throw ExtractError("extraction prompt template is empty");
  }

  std::vector<PrivacyItem> extract(std::string_view message,
                                   const std::optional<std::string>& real_name) const override {
    std::string prompt = build_extraction_prompt(template_, real_name, message);
    std::string raw = client_.complete({ChatMessage{"user", prompt}});
    auto items = parse_extraction_output(raw);
    std::vector<PrivacyItem> kept;
    kept.reserve(items.size());
    for (auto& item : items) {
      if (message.find(item.original_text) == std::string_view::npos) {
        ++dropped_;
        continue;
      }
      kept.push_back(std::move(item));
    }
    return kept;
  }

  // Items the remote model asserted but that are not substrings of the input.
  std::size_t dropped_items() const { return dropped_.load(); }

 private:
  RemoteCloudClient& client_;
  std::string template_;
  mutable std::atomic<std::size_t> dropped_{0};
};

}  // namespace maskgate
