#include "sidkit/chat_client.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace sidkit::prompt {

using nlohmann::json;

HttpChatClient::HttpChatClient(ChatClientConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.timeout_seconds <= 0.0)
    throw std::invalid_argument("HttpChatClient: timeout must be positive");
  if (cfg_.max_concurrent < 1)
    throw std::invalid_argument("HttpChatClient: concurrency must be >= 1");
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  json body;
  body["model"] = cfg_.model;
  body["temperature"] = cfg_.temperature;
  body["messages"] = json::array();
  for (const ChatMessage& m : messages)
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  const char* key = nullptr;
  if (!cfg_.api_key_env.empty()) key = std::getenv(cfg_.api_key_env.c_str());

  if (cfg_.debug_log)
    std::cerr << "[chat] POST " << cfg_.base_url << "/v1/chat/completions"
              << (key ? " authorization=Bearer <redacted>" : "") << " body=" << payload << "\n";

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.retry_backoff_seconds));

    httplib::Client client(cfg_.base_url);
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    httplib::Headers headers;
    if (key) headers.emplace("Authorization", std::string("Bearer ") + key);

    httplib::Result res =
        client.Post("/v1/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("chat completion failed: HTTP " + std::to_string(res->status) +
                               " " + res->body);

    if (cfg_.debug_log) std::cerr << "[chat] response=" << res->body << "\n";
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content"))
      throw std::runtime_error("chat completion returned an unexpected body");
    return parsed["choices"][0]["message"]["content"].get<std::string>();
  }
  throw std::runtime_error("chat completion failed after " +
                           std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace sidkit::prompt
