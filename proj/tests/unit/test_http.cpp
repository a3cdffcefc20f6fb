#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include <json.hpp>

#include "nat/agent/backend.hpp"
#include "nat/core/error.hpp"
#include "nat/net/http.hpp"
#include "nat/tools/search.hpp"

using namespace nat;

namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
public:
  explicit LocalServer(const std::function<void(httplib::Server&)>& routes) {
    routes(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  [[nodiscard]] std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

net::RetryPolicy fast_retry(int attempts) {
  net::RetryPolicy p;
  p.attempts = attempts;
  p.initial_backoff = std::chrono::milliseconds(1);
  return p;
}

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("5xx and 429 are retried until success") {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
      s.Post("/x", [&](const httplib::Request&, httplib::Response& res) {
        int n = ++calls;
        if (n == 1) {
          res.status = 503;
        } else if (n == 2) {
          res.status = 429;
        } else {
          res.set_content("ok", "text/plain");
        }
      });
    });
    net::HttplibTransport transport;
    auto r = net::post_with_retry(transport, server.url("/x"), "{}", {}, fast_retry(3));
    CHECK(r.status == 200);
    CHECK(r.body == "ok");
    CHECK(calls == 3);
  }

  TEST_CASE("retries are bounded") {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
      s.Post("/x", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 500;
      });
    });
    net::HttplibTransport transport;
    CHECK_THROWS_AS(net::post_with_retry(transport, server.url("/x"), "{}", {}, fast_retry(3)), TransportError);
    CHECK(calls == 3);
  }

  TEST_CASE("4xx fails without retry") {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
      s.Post("/x", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 401;
      });
    });
    net::HttplibTransport transport;
    CHECK_THROWS_WITH_AS(net::post_with_retry(transport, server.url("/x"), "{}", {}, fast_retry(3)),
                         doctest::Contains("HTTP 401"), TransportError);
    CHECK(calls == 1);
  }

  TEST_CASE("connection failure is a transport error") {
    net::HttplibTransport transport(std::chrono::seconds(1));
    CHECK_THROWS_AS(net::post_with_retry(transport, "http://127.0.0.1:1/x", "{}", {}, fast_retry(2)), TransportError);
  }

  TEST_CASE("chat backend sends tool turns as user and reads the first choice") {
    std::string seen_body;
    std::string seen_auth;
    LocalServer server([&](httplib::Server& s) {
      s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Action: finish[4]"}}]})",
                        "application/json");
      });
    });
    agent::HttpBackendConfig cfg;
    cfg.endpoint_url = server.url("/v1/chat/completions");
    cfg.model_id = "m";
    cfg.api_key = "secret";
    cfg.retry = fast_retry(1);
    agent::HttpChatBackend backend(cfg, std::make_shared<net::HttplibTransport>());
    agent::CompletionRequest req;
    req.messages = {{Role::system, "s"}, {Role::user, "u"}, {Role::assistant, "a"}, {Role::tool, "Observation: 1"}};
    req.temperature = 0.5;
    req.stop = {"\nObservation:"};
    CHECK(backend.complete(req) == "Action: finish[4]");
    auto body = nlohmann::json::parse(seen_body);
    CHECK(body["model"] == "m");
    CHECK(body["messages"][3]["role"] == "user");
    CHECK(body["temperature"] == 0.5);
    CHECK(body["stop"][0] == "\nObservation:");
    CHECK(seen_auth == "Bearer secret");
    CHECK_FALSE(backend.supports_logprobs());
    CHECK_THROWS_AS(backend.token_logprobs({}, "x"), CapabilityError);
  }

  TEST_CASE("malformed completion bodies are transport errors") {
    LocalServer server([&](httplib::Server& s) {
      s.Post("/c", [&](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    });
    agent::HttpBackendConfig cfg;
    cfg.endpoint_url = server.url("/c");
    cfg.model_id = "m";
    cfg.retry = fast_retry(1);
    agent::HttpChatBackend backend(cfg, std::make_shared<net::HttplibTransport>());
    CHECK_THROWS_AS(backend.complete({}), TransportError);
  }

  TEST_CASE("echo log-probs keep only completion tokens") {
    std::vector<Message> context{{Role::system, "s"}, {Role::user, "u"}};
    const auto prompt = agent::HttpChatBackend::render_prompt(context);
    CHECK(prompt == "system: s\nuser: u\nassistant: ");
    LocalServer server([&](httplib::Server& s) {
      s.Post("/completions", [&](const httplib::Request&, httplib::Response& res) {
        nlohmann::json lp;
        lp["token_logprobs"] = {nullptr, -0.1, -0.2, -0.3};
        lp["text_offset"] = {0, 3, prompt.size(), prompt.size() + 3};
        nlohmann::json j;
        j["choices"] = {{{"logprobs", lp}}};
        res.set_content(j.dump(), "application/json");
      });
    });
    agent::HttpBackendConfig cfg;
    cfg.endpoint_url = server.url("/chat");
    cfg.logprobs_url = server.url("/completions");
    cfg.model_id = "m";
    cfg.retry = fast_retry(1);
    agent::HttpChatBackend backend(cfg, std::make_shared<net::HttplibTransport>());
    REQUIRE(backend.supports_logprobs());
    auto lps = backend.token_logprobs(context, "ab cd");
    CHECK(lps == std::vector<double>{-0.2, -0.3});
  }

  TEST_CASE("serper client posts the query with the API key") {
    std::string key;
    std::string q;
    LocalServer server([&](httplib::Server& s) {
      s.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
        key = req.get_header_value("X-API-KEY");
        q = nlohmann::json::parse(req.body)["q"];
        res.set_content(R"({"organic":[{"title":"T","snippet":"S","link":"L"}]})", "application/json");
      });
    });
    tools::SerperSearchClient client(server.url("/search"), "k123", std::make_shared<net::HttplibTransport>(),
                                     fast_retry(1));
    auto rs = client.fetch("capital of france");
    CHECK(key == "k123");
    CHECK(q == "capital of france");
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].url == "L");
  }
}
