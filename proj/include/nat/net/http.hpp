#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace nat::net {

using Header = std::pair<std::string, std::string>;

struct HttpResponse {
  int status = 0;
  std::string body;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

/// Minimal JSON-over-HTTP(S) transport. Implementations must be safe to call
/// from several threads at once.
class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  /// Throws TransportError when no response could be obtained.
  virtual HttpResponse post(const std::string& url, const std::string& body, const std::vector<Header>& headers) = 0;
};

/// cpp-httplib backed transport; one connection per call.
class HttplibTransport final : public HttpTransport {
public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
  HttpResponse post(const std::string& url, const std::string& body, const std::vector<Header>& headers) override;

private:
  std::chrono::seconds timeout_;
};

/// POSTs `body` and returns the 2xx response. Transport failures, 429 and
/// 5xx responses are retried with exponential backoff; other statuses fail
/// immediately. Throws TransportError once attempts are exhausted.
HttpResponse post_with_retry(HttpTransport& transport, const std::string& url, const std::string& body,
                             const std::vector<Header>& headers, const RetryPolicy& policy);

/// Runs `attempt` until it returns without throwing TransportError.
void retry_transport(const RetryPolicy& policy, const std::function<void()>& attempt);

}  // namespace nat::net
