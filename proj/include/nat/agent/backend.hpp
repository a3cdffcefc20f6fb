#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nat/core/types.hpp"
#include "nat/net/http.hpp"

namespace nat::agent {

struct CompletionRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::vector<std::string> stop;

  // Episode context. Not sent to remote endpoints; the mock backend keys its
  // script on it and the response cache folds sample_index into the key.
  std::string question_id;
  int turn_index = 0;
  int sample_index = 0;
};

/// A chat-model endpoint. Implementations must be safe for concurrent calls.
class ChatBackend {
public:
  virtual ~ChatBackend() = default;

  /// Identity used in cache keys; differs whenever responses could differ.
  [[nodiscard]] virtual std::string id() const = 0;
  [[nodiscard]] virtual std::string model_id() const = 0;

  /// Throws TransportError when no completion could be obtained.
  virtual std::string complete(const CompletionRequest& request) = 0;

  [[nodiscard]] virtual bool supports_logprobs() const { return false; }

  /// Natural-log probability of each token of `completion` given `context`.
  /// Throws CapabilityError unless supports_logprobs().
  virtual std::vector<double> token_logprobs(const std::vector<Message>& context, std::string_view completion);
};

/// Scripted backend for tests and offline runs.
///
/// Script file (JSON):
///   {
///     "model_id": "mock",                       optional
///     "episodes": {"<question_id>": ["turn 0 text", "turn 1 text", ...]},
///     "samples":  {"<question_id>#<sample_index>": [...]},   optional override
///     "default":  ["..."],                      optional, for unlisted questions
///     "token_prob": 0.5,                        optional, enables token_logprobs
///     "token_probs": {"token": 0.9}             optional per-token override
///   }
///
/// Responses ignore temperature. Asking past the end of a script raises
/// TransportError. Tokens for log-probabilities are whitespace-separated.
class MockBackend final : public ChatBackend {
public:
  struct Script {
    std::string model_id = "mock";
    std::map<std::string, std::vector<std::string>> episodes;
    std::map<std::string, std::vector<std::string>> samples;
    std::optional<std::vector<std::string>> fallback;
    std::optional<double> token_prob;
    std::map<std::string, double> token_probs;
  };

  explicit MockBackend(Script script);
  static MockBackend from_json(std::string_view json_text);
  static MockBackend from_file(const std::filesystem::path& path);

  [[nodiscard]] std::string id() const override { return id_; }
  [[nodiscard]] std::string model_id() const override { return script_.model_id; }
  std::string complete(const CompletionRequest& request) override;
  [[nodiscard]] bool supports_logprobs() const override { return script_.token_prob.has_value(); }
  std::vector<double> token_logprobs(const std::vector<Message>& context, std::string_view completion) override;

private:
  Script script_;
  std::string id_;
};

struct HttpBackendConfig {
  /// Full chat-completions URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string endpoint_url;
  std::string model_id;
  std::string api_key;
  /// Optional completions URL supporting {"echo": true, "logprobs": 0}; enables token_logprobs.
  std::string logprobs_url;
  net::RetryPolicy retry;
};

/// Chat-completions client. Tool observations are sent with the "user" role.
class HttpChatBackend final : public ChatBackend {
public:
  HttpChatBackend(HttpBackendConfig config, std::shared_ptr<net::HttpTransport> transport);

  [[nodiscard]] std::string id() const override;
  [[nodiscard]] std::string model_id() const override { return config_.model_id; }
  std::string complete(const CompletionRequest& request) override;
  [[nodiscard]] bool supports_logprobs() const override { return !config_.logprobs_url.empty(); }
  std::vector<double> token_logprobs(const std::vector<Message>& context, std::string_view completion) override;

  /// The request body for `request` (exposed for tests).
  [[nodiscard]] std::string request_body(const CompletionRequest& request) const;

  /// Plain-text rendering of a conversation used as the echo prompt.
  static std::string render_prompt(const std::vector<Message>& context);

private:
  HttpBackendConfig config_;
  std::shared_ptr<net::HttpTransport> transport_;
};

}  // namespace nat::agent
