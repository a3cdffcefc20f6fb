#include "nat/net/http.hpp"

#include <httplib.h>

#include <thread>

#include "nat/core/error.hpp"

namespace nat::net {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("url: missing scheme in \"" + url + "\"");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::vector<Header>& headers) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers hs;
  for (const auto& [k, v] : headers) hs.emplace(k, v);
  auto res = client.Post(path, hs, body, "application/json");
  if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

void retry_transport(const RetryPolicy& policy, const std::function<void()>& attempt) {
  auto backoff = policy.initial_backoff;
  const int attempts = std::max(1, policy.attempts);
  for (int i = 1;; ++i) {
    try {
      attempt();
      return;
    } catch (const TransportError&) {
      if (i >= attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
  }
}

HttpResponse post_with_retry(HttpTransport& transport, const std::string& url, const std::string& body,
                             const std::vector<Header>& headers, const RetryPolicy& policy) {
  HttpResponse response;
  bool fatal = false;
  retry_transport(policy, [&] {
    response = transport.post(url, body, headers);
    if (response.status >= 200 && response.status < 300) return;
    if (response.status != 429 && response.status < 500) {
      fatal = true;
      return;
    }
    throw TransportError("POST " + url + " returned HTTP " + std::to_string(response.status));
  });
  if (fatal) throw TransportError("POST " + url + " returned HTTP " + std::to_string(response.status));
  return response;
}

}  // namespace nat::net
