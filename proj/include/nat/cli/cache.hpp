#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "nat/agent/backend.hpp"

namespace nat::cli {

/// Content-addressed response store. Entries live at
/// <dir>/<first two hex digits>/<sha256>.json and are written via
/// temp-file-and-rename, so concurrent readers never see partial files.
class ResponseCache {
public:
  explicit ResponseCache(std::filesystem::path dir);

  /// Canonical key text: sorted-key compact JSON of backend id, messages,
  /// temperature, max_tokens, sample_index and stop sequences.
  static std::string canonical_key(const std::string& backend_id, const agent::CompletionRequest& request);
  static std::string key_hash(const std::string& canonical);

  [[nodiscard]] std::optional<std::string> get(const std::string& hash) const;

  /// Returns the stored response, or calls `fetcher`, stores its result and
  /// returns it. Concurrent misses on one key share a single fetch. A
  /// throwing fetcher stores nothing and the error reaches every waiter.
  std::string get_or_fetch(const std::string& hash, const std::string& canonical,
                           const std::function<std::string()>& fetcher);

  [[nodiscard]] std::filesystem::path entry_path(const std::string& hash) const;
  [[nodiscard]] std::size_t hits() const { return hits_; }
  [[nodiscard]] std::size_t fetches() const { return fetches_; }

private:
  void store(const std::string& hash, const std::string& canonical, const std::string& response) const;

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_future<std::string>> in_flight_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> fetches_{0};
};

/// Routes completions through a ResponseCache. Log-probabilities pass
/// straight through.
class CachedBackend final : public agent::ChatBackend {
public:
  CachedBackend(std::shared_ptr<agent::ChatBackend> inner, std::shared_ptr<ResponseCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  [[nodiscard]] std::string id() const override { return inner_->id(); }
  [[nodiscard]] std::string model_id() const override { return inner_->model_id(); }
  std::string complete(const agent::CompletionRequest& request) override;
  [[nodiscard]] bool supports_logprobs() const override { return inner_->supports_logprobs(); }
  std::vector<double> token_logprobs(const std::vector<Message>& context, std::string_view completion) override {
    return inner_->token_logprobs(context, completion);
  }

private:
  std::shared_ptr<agent::ChatBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace nat::cli
