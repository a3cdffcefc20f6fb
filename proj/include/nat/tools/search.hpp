#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nat/net/http.hpp"
#include "nat/tools/observation.hpp"

namespace nat::tools {

struct SearchResult {
  std::string title;
  std::string snippet;
  std::string url;
  double rank_score = 0.0;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// Source of raw (unranked) search results. Throws TransportError.
class SearchClient {
public:
  virtual ~SearchClient() = default;
  virtual std::vector<SearchResult> fetch(std::string_view query) = 0;
};

/// Serper-compatible live search: POST {"q": query} with X-API-KEY, results
/// read from the "organic" array.
class SerperSearchClient final : public SearchClient {
public:
  SerperSearchClient(std::string endpoint, std::string api_key, std::shared_ptr<net::HttpTransport> transport,
                     net::RetryPolicy retry = {});
  std::vector<SearchResult> fetch(std::string_view query) override;

private:
  std::string endpoint_;
  std::string api_key_;
  std::shared_ptr<net::HttpTransport> transport_;
  net::RetryPolicy retry_;
};

/// Offline search: `<dir>/<sha256(query)>.json` holds a Serper-style response.
/// Unknown queries return no results.
class FixtureSearchClient final : public SearchClient {
public:
  explicit FixtureSearchClient(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::vector<SearchResult> fetch(std::string_view query) override;

  static std::string fixture_name(std::string_view query);

private:
  std::filesystem::path dir_;
};

/// Parses a Serper-style body ({"organic": [{"title","snippet","link"}]}).
std::vector<SearchResult> parse_serper_response(std::string_view body);

/// Scores candidates against a query. Higher is more relevant.
class Reranker {
public:
  virtual ~Reranker() = default;
  virtual std::vector<double> score(std::string_view query, std::span<const std::string> candidates) = 0;
};

/// Fraction of distinct query tokens (lower-cased alphanumeric runs) that
/// appear in the candidate. Scores lie in [0, 1].
class LexicalReranker final : public Reranker {
public:
  std::vector<double> score(std::string_view query, std::span<const std::string> candidates) override;
};

/// Produces one embedding vector per input text. Throws TransportError.
class Embedder {
public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Embeddings endpoint speaking the common {"input": [...]} ->
/// {"data": [{"embedding": [...]}]} shape.
class HttpEmbedder final : public Embedder {
public:
  HttpEmbedder(std::string endpoint, std::string model, std::string api_key,
               std::shared_ptr<net::HttpTransport> transport, net::RetryPolicy retry = {});
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  std::shared_ptr<net::HttpTransport> transport_;
  net::RetryPolicy retry_;
};

/// Cosine similarity between query and candidate embeddings, clamped to [0, 1].
class EmbeddingReranker final : public Reranker {
public:
  explicit EmbeddingReranker(std::shared_ptr<Embedder> embedder) : embedder_(std::move(embedder)) {}
  std::vector<double> score(std::string_view query, std::span<const std::string> candidates) override;

private:
  std::shared_ptr<Embedder> embedder_;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct RerankOutcome {
  /// (candidate index, score), score descending, ties in input order.
  std::vector<std::pair<std::size_t, double>> ranking;
  bool fallback_used = false;
  std::string fallback_reason;
};

/// Ranks candidates. If the reranker fails with TransportError, the lexical
/// scorer is used instead and the fallback is flagged.
RerankOutcome rerank(std::string_view query, std::span<const std::string> candidates, Reranker& reranker);

inline constexpr std::size_t kDefaultTopK = 3;
inline constexpr std::size_t kSnippetChars = 300;

/// Fetches, reranks on "title snippet", and keeps the best `top_k`. The
/// returned results carry their rerank score. Throws TransportError or
/// ValidationError (empty query, top_k == 0).
std::vector<SearchResult> search(std::string_view query, SearchClient& client, Reranker& reranker,
                                 std::size_t top_k = kDefaultTopK);

/// Numbered lines "[1] title SEP snippet", where SEP is U+2014 between spaces.
/// Snippets are cut to 300 characters.
std::string format_results(std::span<const SearchResult> results);

/// The search tool: search + format_results, with tool errors for
/// unavailable search and "No results found." for an empty result set.
ObservationResult search_tool(std::string_view query, SearchClient& client, Reranker& reranker,
                              std::size_t top_k = kDefaultTopK);

}  // namespace nat::tools
