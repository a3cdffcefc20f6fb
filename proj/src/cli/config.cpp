#include "nat/cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"

namespace nat::cli {

namespace pt = boost::property_tree;

namespace {

std::string interpolate(const std::string& value, const std::string& where) {
  static const std::regex kVar(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(value.begin(), value.end(), kVar);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(value, last, static_cast<std::size_t>(m.position()) - last);
    const std::string name = m[1].str();
    const char* env = std::getenv(name.c_str());
    if (env == nullptr) throw ConfigError(where + ": environment variable " + name + " is not set");
    out += env;
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(value, last);
  return out;
}

template <typename T>
T parse_integer(const std::string& text, const std::string& where) {
  T value{};
  auto s = strings::trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(where + ": expected an integer, got \"" + text + "\"");
  return value;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : strings::split(text, ',')) {
    auto s = std::string(strings::trim(part));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("expected a comma-separated number list, got \"" + text + "\"");
    out.push_back(v);
  }
  return out;
}

RunConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::map<std::string, std::set<std::string>> kKnown{
      {"backend", {"endpoint_url", "model_id", "api_key_env", "max_tokens", "retries", "logprobs_url"}},
      {"tools", {"search_endpoint", "search_fixtures", "reranker", "embedding_endpoint", "embedding_model", "top_k"}},
      {"episode", {"max_turns", "mode", "temperatures", "workers"}},
      {"paths", {"cache_dir", "data_dir", "out_dir"}},
      {"run", {"strategy", "seed"}},
  };

  RunConfig c;
  for (const auto& [section, body] : tree) {
    auto known = kKnown.find(section);
    if (known == kKnown.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const std::string where = section + "." + key;
      if (!known->second.count(key)) throw ConfigError("config: unknown key " + where);
      const std::string v = interpolate(std::string(strings::trim(node.data())), where);

      if (section == "backend") {
        if (key == "endpoint_url") c.backend.endpoint_url = v;
        else if (key == "model_id") c.backend.model_id = v;
        else if (key == "api_key_env") c.backend.api_key_env = v;
        else if (key == "max_tokens") c.backend.max_tokens = parse_integer<int>(v, where);
        else if (key == "retries") c.backend.retries = parse_integer<int>(v, where);
        else if (key == "logprobs_url") c.backend.logprobs_url = v;
      } else if (section == "tools") {
        if (key == "search_endpoint") c.tools.search_endpoint = v;
        else if (key == "search_fixtures") c.tools.search_fixtures = v;
        else if (key == "embedding_endpoint") c.tools.embedding_endpoint = v;
        else if (key == "embedding_model") c.tools.embedding_model = v;
        else if (key == "top_k") c.tools.top_k = parse_integer<int>(v, where);
        else if (key == "reranker") {
          if (v == "lexical") c.tools.reranker = RerankerKind::lexical;
          else if (v == "remote") c.tools.reranker = RerankerKind::remote;
          else throw ConfigError(where + ": expected lexical or remote");
        }
      } else if (section == "episode") {
        if (key == "max_turns") c.episode.max_turns = parse_integer<int>(v, where);
        else if (key == "mode") c.episode.mode = agent::parse_episode_mode(v);
        else if (key == "temperatures") c.episode.temperatures = parse_number_list(v);
        else if (key == "workers") c.episode.workers = parse_integer<unsigned>(v, where);
      } else if (section == "paths") {
        if (key == "cache_dir") c.paths.cache_dir = v;
        else if (key == "data_dir") c.paths.data_dir = v;
        else if (key == "out_dir") c.paths.out_dir = v;
      } else if (section == "run") {
        if (key == "strategy") c.strategy = v;
        else if (key == "seed") c.seed = parse_integer<std::uint64_t>(v, where);
      }
    }
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

void validate(const RunConfig& c) {
  if (c.backend.max_tokens < 1) throw ConfigError("backend.max_tokens must be >= 1");
  if (c.backend.retries < 1) throw ConfigError("backend.retries must be >= 1");
  if (c.tools.top_k < 1) throw ConfigError("tools.top_k must be >= 1");
  if (c.tools.reranker == RerankerKind::remote && c.tools.embedding_endpoint.empty())
    throw ConfigError("tools.reranker = remote needs tools.embedding_endpoint");
  if (c.episode.max_turns < 1) throw ConfigError("episode.max_turns must be >= 1");
  if (c.episode.workers < 1) throw ConfigError("episode.workers must be >= 1");
  if (c.episode.temperatures.empty()) throw ConfigError("episode.temperatures must not be empty");
  for (double t : c.episode.temperatures) {
    if (!(t >= 0.0 && t <= 2.0)) throw ConfigError("episode.temperatures must lie in [0, 2]");
  }
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream out;
  auto temps = [&] {
    std::vector<std::string> parts;
    for (double t : c.episode.temperatures) {
      char buf[32];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, t);
      parts.emplace_back(buf, end);
    }
    return strings::join(parts, ",");
  };
  out << "[backend]\n"
      << "endpoint_url = " << c.backend.endpoint_url << "\n"
      << "model_id = " << c.backend.model_id << "\n"
      << "api_key_env = " << c.backend.api_key_env << "\n"
      << "max_tokens = " << c.backend.max_tokens << "\n"
      << "retries = " << c.backend.retries << "\n"
      << "logprobs_url = " << c.backend.logprobs_url << "\n"
      << "\n[tools]\n"
      << "search_endpoint = " << c.tools.search_endpoint << "\n"
      << "search_fixtures = " << c.tools.search_fixtures << "\n"
      << "reranker = " << (c.tools.reranker == RerankerKind::lexical ? "lexical" : "remote") << "\n"
      << "embedding_endpoint = " << c.tools.embedding_endpoint << "\n"
      << "embedding_model = " << c.tools.embedding_model << "\n"
      << "top_k = " << c.tools.top_k << "\n"
      << "\n[episode]\n"
      << "max_turns = " << c.episode.max_turns << "\n"
      << "mode = " << agent::to_string(c.episode.mode) << "\n"
      << "temperatures = " << temps() << "\n"
      << "workers = " << c.episode.workers << "\n"
      << "\n[paths]\n"
      << "cache_dir = " << c.paths.cache_dir.string() << "\n"
      << "data_dir = " << c.paths.data_dir.string() << "\n"
      << "out_dir = " << c.paths.out_dir.string() << "\n"
      << "\n[run]\n"
      << "strategy = " << c.strategy << "\n"
      << "seed = " << c.seed << "\n";
  return out.str();
}

}  // namespace nat::cli
