#include "nat/agent/backend.hpp"

#include <cmath>

#include <json.hpp>

#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"

namespace nat::agent {

using json = nlohmann::json;

std::vector<double> ChatBackend::token_logprobs(const std::vector<Message>&, std::string_view) {
  throw CapabilityError("backend " + id() + " does not expose token log-probabilities");
}

MockBackend::MockBackend(Script script) : script_(std::move(script)) {
  if (script_.token_prob && !(*script_.token_prob > 0.0 && *script_.token_prob <= 1.0))
    throw ConfigError("mock script: token_prob must lie in (0, 1]");
  for (const auto& [token, p] : script_.token_probs) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("mock script: token_probs[\"" + token + "\"] must lie in (0, 1]");
  }
  json canonical;
  canonical["model_id"] = script_.model_id;
  canonical["episodes"] = script_.episodes;
  canonical["samples"] = script_.samples;
  canonical["default"] = script_.fallback ? json(*script_.fallback) : json(nullptr);
  id_ = "mock:" + strings::sha256_hex(canonical.dump()).substr(0, 16);
}

MockBackend MockBackend::from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("mock script: malformed JSON: ") + e.what());
  }
  try {
    Script s;
    s.model_id = j.value("model_id", std::string("mock"));
    if (j.contains("episodes")) s.episodes = j.at("episodes").get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("samples")) s.samples = j.at("samples").get<std::map<std::string, std::vector<std::string>>>();
    if (j.contains("default")) s.fallback = j.at("default").get<std::vector<std::string>>();
    if (j.contains("token_prob")) s.token_prob = j.at("token_prob").get<double>();
    if (j.contains("token_probs")) s.token_probs = j.at("token_probs").get<std::map<std::string, double>>();
    return MockBackend(std::move(s));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mock script: ") + e.what());
  }
}

MockBackend MockBackend::from_file(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::string MockBackend::complete(const CompletionRequest& request) {
  const std::vector<std::string>* turns = nullptr;
  if (auto it = script_.samples.find(request.question_id + "#" + std::to_string(request.sample_index));
      it != script_.samples.end()) {
    turns = &it->second;
  } else if (auto ep = script_.episodes.find(request.question_id); ep != script_.episodes.end()) {
    turns = &ep->second;
  } else if (script_.fallback) {
    turns = &*script_.fallback;
  }
  if (!turns) throw TransportError("mock script has no episode for question " + request.question_id);
  if (request.turn_index < 0 || static_cast<std::size_t>(request.turn_index) >= turns->size())
    throw TransportError("mock script exhausted for question " + request.question_id + " at turn " +
                         std::to_string(request.turn_index));
  return (*turns)[static_cast<std::size_t>(request.turn_index)];
}

std::vector<double> MockBackend::token_logprobs(const std::vector<Message>& context, std::string_view completion) {
  if (!supports_logprobs()) return ChatBackend::token_logprobs(context, completion);
  std::vector<double> out;
  for (const auto& token : strings::split_whitespace(completion)) {
    auto it = script_.token_probs.find(token);
    out.push_back(std::log(it != script_.token_probs.end() ? it->second : *script_.token_prob));
  }
  return out;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config, std::shared_ptr<net::HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (config_.endpoint_url.empty()) throw ConfigError("backend.endpoint_url is required for the http backend");
  if (config_.model_id.empty()) throw ConfigError("backend.model_id is required for the http backend");
}

std::string HttpChatBackend::id() const { return "http:" + config_.endpoint_url + "#" + config_.model_id; }

std::string HttpChatBackend::request_body(const CompletionRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    std::string_view role = m.role == Role::tool ? "user" : to_string(m.role);
    messages.push_back({{"role", role}, {"content", m.content}});
  }
  json body{{"model", config_.model_id},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (!request.stop.empty()) body["stop"] = request.stop;
  return body.dump();
}

std::string HttpChatBackend::complete(const CompletionRequest& request) {
  std::vector<net::Header> headers{{"Content-Type", "application/json"}};
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  auto response = net::post_with_retry(*transport_, config_.endpoint_url, request_body(request), headers, config_.retry);
  try {
    auto j = json::parse(response.body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::string HttpChatBackend::render_prompt(const std::vector<Message>& context) {
  std::string out;
  for (const auto& m : context) {
    out.append(to_string(m.role)).append(": ").append(m.content).append("\n");
  }
  out.append("assistant: ");
  return out;
}

std::vector<double> HttpChatBackend::token_logprobs(const std::vector<Message>& context, std::string_view completion) {
  if (!supports_logprobs()) return ChatBackend::token_logprobs(context, completion);
  const std::string prompt = render_prompt(context);
  json body{{"model", config_.model_id},     {"prompt", prompt + std::string(completion)},
            {"echo", true},                  {"logprobs", 0},
            {"max_tokens", 0},               {"temperature", 0}};
  std::vector<net::Header> headers{{"Content-Type", "application/json"}};
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  auto response = net::post_with_retry(*transport_, config_.logprobs_url, body.dump(), headers, config_.retry);
  try {
    auto j = json::parse(response.body);
    const auto& lp = j.at("choices").at(0).at("logprobs");
    const auto& values = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    std::vector<double> out;
    for (std::size_t i = 0; i < values.size() && i < offsets.size(); ++i) {
      if (offsets[i].get<std::size_t>() < prompt.size() || values[i].is_null()) continue;
      out.push_back(values[i].get<double>());
    }
    return out;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed logprobs response: ") + e.what());
  }
}

}  // namespace nat::agent
