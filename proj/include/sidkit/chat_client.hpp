#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sidkit::prompt {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatClientConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model = "teacher";
  std::string api_key_env = "SIDKIT_API_KEY";  // name of the variable, never the key
  double timeout_seconds = 60.0;
  std::size_t max_concurrent = 4;
  double temperature = 0.7;
  std::size_t max_retries = 2;  // transport errors and 5xx
  double retry_backoff_seconds = 0.5;
  bool debug_log = false;  // bodies to stderr, bearer token redacted
};

// Anything that can answer a chat prompt with assistant text.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

// Chat-completions over HTTP: POST {model, messages, temperature} to
// /v1/chat/completions, read choices[0].message.content back. The bearer
// token comes from the environment variable named in the config.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ChatClientConfig cfg);
  std::string complete(const std::vector<ChatMessage>& messages) override;

  const ChatClientConfig& config() const { return cfg_; }

 private:
  ChatClientConfig cfg_;
};

// Scripted stand-in for tests and offline runs. The responder sees the
// messages and a 0-based per-client call index.
class MockChatClient : public ChatClient {
 public:
  using Responder =
      std::function<std::string(const std::vector<ChatMessage>&, std::size_t call_index)>;

  explicit MockChatClient(Responder responder) : responder_(std::move(responder)) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    return responder_(messages, calls_.fetch_add(1));
  }

  std::size_t call_count() const { return calls_.load(); }

 private:
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace sidkit::prompt
