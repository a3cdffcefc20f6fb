#include "nat/tools/search.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nat/core/error.hpp"
#include "nat/core/strings.hpp"

namespace nat::tools {

using json = nlohmann::json;

namespace {

std::set<std::string> lexical_tokens(std::string_view text) {
  std::set<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.insert(std::exchange(current, {}));
  };
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

}  // namespace

std::vector<SearchResult> parse_serper_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("malformed search response: ") + e.what());
  }
  std::vector<SearchResult> out;
  auto organic = j.find("organic");
  if (organic == j.end() || !organic->is_array()) return out;
  for (const auto& item : *organic) {
    SearchResult r;
    r.title = item.value("title", "");
    r.snippet = item.value("snippet", "");
    r.url = item.value("link", "");
    out.push_back(std::move(r));
  }
  return out;
}

SerperSearchClient::SerperSearchClient(std::string endpoint, std::string api_key,
                                       std::shared_ptr<net::HttpTransport> transport, net::RetryPolicy retry)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), transport_(std::move(transport)), retry_(retry) {}

std::vector<SearchResult> SerperSearchClient::fetch(std::string_view query) {
  json body{{"q", std::string(query)}};
  auto response = net::post_with_retry(*transport_, endpoint_, body.dump(),
                                       {{"X-API-KEY", api_key_}, {"Content-Type", "application/json"}}, retry_);
  return parse_serper_response(response.body);
}

std::string FixtureSearchClient::fixture_name(std::string_view query) { return strings::sha256_hex(query) + ".json"; }

std::vector<SearchResult> FixtureSearchClient::fetch(std::string_view query) {
  auto path = dir_ / fixture_name(query);
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TransportError("cannot read search fixture " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_serper_response(ss.str());
}

std::vector<double> LexicalReranker::score(std::string_view query, std::span<const std::string> candidates) {
  auto q = lexical_tokens(query);
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (q.empty()) {
      scores.push_back(0.0);
      continue;
    }
    auto ct = lexical_tokens(c);
    auto shared = std::count_if(q.begin(), q.end(), [&](const std::string& t) { return ct.contains(t); });
    scores.push_back(static_cast<double>(shared) / static_cast<double>(q.size()));
  }
  return scores;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, std::string model, std::string api_key,
                           std::shared_ptr<net::HttpTransport> transport, net::RetryPolicy retry)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      transport_(std::move(transport)),
      retry_(retry) {}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) {
  json body{{"model", model_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  std::vector<net::Header> headers{{"Content-Type", "application/json"}};
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  auto response = net::post_with_retry(*transport_, endpoint_, body.dump(), headers, retry_);
  try {
    auto j = json::parse(response.body);
    std::vector<std::vector<double>> out;
    for (const auto& item : j.at("data")) out.push_back(item.at("embedding").get<std::vector<double>>());
    if (out.size() != texts.size()) throw TransportError("embedding count mismatch");
    return out;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed embedding response: ") + e.what());
  }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> EmbeddingReranker::score(std::string_view query, std::span<const std::string> candidates) {
  std::vector<std::string> texts;
  texts.reserve(candidates.size() + 1);
  texts.emplace_back(query);
  texts.insert(texts.end(), candidates.begin(), candidates.end());
  auto vectors = embedder_->embed(texts);
  std::vector<double> scores;
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    scores.push_back(std::clamp(cosine_similarity(vectors[0], vectors[i]), 0.0, 1.0));
  }
  return scores;
}

RerankOutcome rerank(std::string_view query, std::span<const std::string> candidates, Reranker& reranker) {
  if (candidates.empty()) throw ValidationError("rerank: candidates must be non-empty");
  RerankOutcome outcome;
  std::vector<double> scores;
  try {
    scores = reranker.score(query, candidates);
    if (scores.size() != candidates.size()) throw TransportError("reranker returned the wrong number of scores");
  } catch (const TransportError& e) {
    LexicalReranker lexical;
    scores = lexical.score(query, candidates);
    outcome.fallback_used = true;
    outcome.fallback_reason = e.what();
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) outcome.ranking.emplace_back(i, scores[i]);
  std::stable_sort(outcome.ranking.begin(), outcome.ranking.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return outcome;
}

std::vector<SearchResult> search(std::string_view query, SearchClient& client, Reranker& reranker, std::size_t top_k) {
  if (strings::trim(query).empty()) throw ValidationError("search: query must be non-empty");
  if (top_k == 0) throw ValidationError("search: top_k must be >= 1");
  auto raw = client.fetch(query);
  if (raw.empty()) return {};
  std::vector<std::string> candidates;
  candidates.reserve(raw.size());
  for (const auto& r : raw) candidates.push_back(r.title + " " + r.snippet);
  auto ranked = rerank(query, candidates, reranker);
  std::vector<SearchResult> out;
  for (std::size_t i = 0; i < ranked.ranking.size() && out.size() < top_k; ++i) {
    auto [index, score] = ranked.ranking[i];
    auto r = raw[index];
    r.rank_score = score;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_results(std::span<const SearchResult> results) {
  std::string out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) out += '\n';
    out += "[" + std::to_string(i + 1) + "] " + results[i].title + " \xE2\x80\x94 " +
           strings::truncate_utf8(results[i].snippet, kSnippetChars);
  }
  return out;
}

ObservationResult search_tool(std::string_view query, SearchClient& client, Reranker& reranker, std::size_t top_k) {
  try {
    auto results = search(query, client, reranker, top_k);
    if (results.empty()) return ObservationResult::ok("No results found.");
    return ObservationResult::ok(format_results(results));
  } catch (const TransportError&) {
    return ObservationResult::error("search unavailable");
  } catch (const ValidationError& e) {
    return ObservationResult::error(e.what());
  }
}

}  // namespace nat::tools
