#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nat/agent/episode.hpp"

namespace nat::cli {

enum class RerankerKind { lexical, remote };

struct RunConfig {
  struct Backend {
    std::string endpoint_url;
    std::string model_id;
    /// Name of the environment variable holding the API key (never the key itself).
    std::string api_key_env = "OPENAI_API_KEY";
    int max_tokens = 512;
    int retries = 3;
    /// Completions endpoint with echo support; enables perplexity over HTTP.
    std::string logprobs_url;
  } backend;

  struct Tools {
    std::string search_endpoint = "https://google.serper.dev/search";
    /// When set, search is served from <dir>/<sha256(query)>.json instead.
    std::string search_fixtures;
    RerankerKind reranker = RerankerKind::lexical;
    std::string embedding_endpoint;
    std::string embedding_model;
    int top_k = 3;
  } tools;

  struct Episode {
    int max_turns = agent::kDefaultMaxTurns;
    agent::EpisodeMode mode = agent::EpisodeMode::react;
    std::vector<double> temperatures = agent::kDefaultTemperatures;
    unsigned workers = 1;
  } episode;

  struct Paths {
    std::filesystem::path cache_dir = ".nat-cache";
    std::filesystem::path data_dir = "data";
    std::filesystem::path out_dir = "out";
  } paths;

  std::string strategy = "nat";
  std::uint64_t seed = 0;
};

/// Parses INI text with sections [backend], [tools], [episode], [paths] and
/// [run] (strategy, seed). ${NAME} is replaced by the environment variable
/// NAME; unset variables and unknown keys raise ConfigError.
RunConfig parse_config(const std::string& ini_text);
RunConfig load_config(const std::filesystem::path& path);

/// Every field, defaults included, as INI text in a fixed order.
std::string to_ini(const RunConfig& config);

/// Throws ConfigError for out-of-range values.
void validate(const RunConfig& config);

std::vector<double> parse_number_list(const std::string& text);

}  // namespace nat::cli
