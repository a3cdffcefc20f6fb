#include "nat/cli/cache.hpp"

#include <chrono>
#include <ctime>

#include <json.hpp>

#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"

namespace nat::cli {

using json = nlohmann::json;  // std::map-backed, so keys come out sorted

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ResponseCache::canonical_key(const std::string& backend_id, const agent::CompletionRequest& request) {
  json j;
  j["backend"] = backend_id;
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  j["messages"] = std::move(msgs);
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_tokens;
  j["sample_index"] = request.sample_index;
  j["stop"] = request.stop;
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string ResponseCache::key_hash(const std::string& canonical) { return strings::sha256_hex(canonical); }

std::filesystem::path ResponseCache::entry_path(const std::string& hash) const {
  return dir_ / hash.substr(0, 2) / (hash + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& hash) const {
  auto path = entry_path(hash);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto j = json::parse(read_file(path));
    return j.at("response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable or torn entry: refetch and overwrite
  }
}

void ResponseCache::store(const std::string& hash, const std::string& canonical, const std::string& response) const {
  auto path = entry_path(hash);
  std::filesystem::create_directories(path.parent_path());
  char stamp[32];
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  json j;
  j["key"] = json::parse(canonical);
  j["response"] = response;
  j["created_at"] = stamp;
  write_file_atomic(path, j.dump(-1, ' ', false, json::error_handler_t::strict) + "\n");
}

std::string ResponseCache::get_or_fetch(const std::string& hash, const std::string& canonical,
                                        const std::function<std::string()>& fetcher) {
  std::promise<std::string> promise;
  {
    std::unique_lock lock(mutex_);
    if (auto it = in_flight_.find(hash); it != in_flight_.end()) {
      auto shared = it->second;
      lock.unlock();
      ++hits_;
      return shared.get();
    }
    if (auto hit = get(hash)) {
      ++hits_;
      return *hit;
    }
    in_flight_.emplace(hash, promise.get_future().share());
  }

  auto finish = [&] {
    std::lock_guard lock(mutex_);
    in_flight_.erase(hash);
  };
  try {
    ++fetches_;
    std::string response = fetcher();
    store(hash, canonical, response);
    promise.set_value(response);
    finish();
    return response;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

std::string CachedBackend::complete(const agent::CompletionRequest& request) {
  const auto canonical = ResponseCache::canonical_key(inner_->id(), request);
  return cache_->get_or_fetch(ResponseCache::key_hash(canonical), canonical,
                              [&] { return inner_->complete(request); });
}

}  // namespace nat::cli
