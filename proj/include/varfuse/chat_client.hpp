#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "varfuse/error.hpp"
#include "varfuse/fsutil.hpp"
#include "varfuse/querygen.hpp"
#include "varfuse/rng.hpp"

namespace varfuse {

struct HttpClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model;
  std::string api_key;                          // wins over api_key_env when set
  std::string api_key_env = "VARFUSE_API_KEY";  // name of the env var holding the key
  std::size_t max_retries = 3;                  // additional attempts after the first
  std::size_t backoff_ms = 250;                 // doubles per retry
  std::size_t timeout_s = 120;
  std::size_t max_concurrency = 4;
  std::string cache_dir;  // empty disables the response cache
};

// Chat-completion client over HTTP(S) with bounded retries, exponential
// backoff, a bounded number of in-flight requests, and an on-disk response
// cache keyed by (prompt, model, seed, temperature).
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
    if (config_.model.empty()) throw ConfigError("http chat client requires a model id");
    auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos)
      throw ConfigError("endpoint must include a scheme: " + config_.endpoint);
    auto path_start = config_.endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
      throw ConfigError("endpoint must include a path: " + config_.endpoint);
    base_ = config_.endpoint.substr(0, path_start);
    path_ = config_.endpoint.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (base_.rfind("https://", 0) == 0)
      throw ConfigError("built without TLS support, use an http:// endpoint");
#endif
    if (config_.api_key.empty() && !config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str())) config_.api_key = key;
    }
  }

  std::string model_id() const override { return config_.model; }

  std::string complete(const Prompt& prompt) override {
    std::filesystem::path cache_path;
    if (!config_.cache_dir.empty()) {
      cache_path = std::filesystem::path(config_.cache_dir) / (cache_key(prompt) + ".txt");
      if (std::filesystem::exists(cache_path)) return read_file(cache_path);
    }

    Slot slot(*this);
    std::string reply = post_with_retries(request_body(prompt));
    if (!cache_path.empty()) atomic_write_file(cache_path, reply);
    return reply;
  }

  std::string cache_key(const Prompt& prompt) const {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.17g", prompt.temperature);
    std::string material = config_.model;
    material += '\x1f';
    material += std::to_string(prompt.seed);
    material += '\x1f';
    material += temp;
    for (const ChatMessage& m : prompt.messages) {
      material += '\x1e';
      material += m.role;
      material += '\x1f';
      material += m.content;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(material)));
    return hex;
  }

 private:
  struct Slot {
    explicit Slot(HttpChatClient& c) : client(c) {
      std::unique_lock lock(client.mutex_);
      client.cv_.wait(lock, [&] { return client.in_flight_ < client.config_.max_concurrency; });
      ++client.in_flight_;
    }
    ~Slot() {
      {
        std::lock_guard lock(client.mutex_);
        --client.in_flight_;
      }
      client.cv_.notify_one();
    }
    HttpChatClient& client;
  };

  std::string request_body(const Prompt& prompt) const {
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& m : prompt.messages)
      messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json body = {
        {"model", config_.model},
        {"messages", messages},
        {"temperature", prompt.temperature},
        {"seed", prompt.seed},
    };
    return body.dump();
  }

  std::string post_with_retries(const std::string& body) {
    std::string last_failure;
    for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
      httplib::Client cli(base_);
      cli.set_connection_timeout(static_cast<time_t>(config_.timeout_s), 0);
      cli.set_read_timeout(static_cast<time_t>(config_.timeout_s), 0);
      httplib::Headers headers;
      if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = cli.Post(path_, headers, body, "application/json");
      if (!res) {
        last_failure = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return extract_content(res->body);
      if (res->status == 429 || res->status >= 500) {
        last_failure = "http status " + std::to_string(res->status);
        continue;
      }
      throw TransportError("POST " + config_.endpoint + " returned status " +
                           std::to_string(res->status) + ": " + res->body.substr(0, 500));
    }
    throw TransportError("POST " + config_.endpoint + " failed after " +
                         std::to_string(config_.max_retries + 1) + " attempts (" + last_failure + ")");
  }

  static std::string extract_content(const std::string& body) {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw ParseError("chat response is not valid JSON: " + body.substr(0, 500));
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
      throw ParseError("chat response has no choices: " + body.substr(0, 500));
    const auto& msg = doc["choices"][0]["message"];
    if (!msg.contains("content") || !msg["content"].is_string())
      throw ParseError("chat response choice has no message content: " + body.substr(0, 500));
    return msg["content"].get<std::string>();
  }

  HttpClientConfig config_;
  std::string base_;
  std::string path_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace varfuse
