#include "nat/agent/episode.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "nat/agent/parse.hpp"
#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"
#include "nat_prompts.inc"

namespace nat::agent {

std::string_view to_string(EpisodeMode mode) { return mode == EpisodeMode::react ? "react" : "cot"; }

EpisodeMode parse_episode_mode(std::string_view text) {
  if (text == "react") return EpisodeMode::react;
  if (text == "cot") return EpisodeMode::cot;
  throw ConfigError("unknown episode mode \"" + std::string(text) + "\"");
}

EpisodeConfig cot_config() {
  EpisodeConfig config;
  config.mode = EpisodeMode::cot;
  config.stop_sequences.clear();
  config.icl_examples = builtin_cot_examples();
  return config;
}

void validate(const EpisodeConfig& config) {
  if (config.max_turns < 1) throw ConfigError("episode.max_turns must be >= 1");
  if (config.max_tokens < 1) throw ConfigError("backend.max_tokens must be >= 1");
  if (!(config.temperature >= 0.0 && config.temperature <= 2.0))
    throw ConfigError("episode temperature must lie in [0, 2]");
  if (config.mode == EpisodeMode::react && !config.icl_examples.empty())
    throw ConfigError("in-context examples are only used in cot mode");
  for (std::size_t i = 0; i < config.icl_examples.size(); ++i) {
    Role expected = i % 2 == 0 ? Role::user : Role::assistant;
    if (config.icl_examples[i].role != expected)
      throw ConfigError("in-context examples must alternate user/assistant");
  }
  if (config.icl_examples.size() % 2 != 0) throw ConfigError("in-context examples must come in pairs");
}

std::string builtin_system_prompt(TaskKind task, EpisodeMode mode) {
  if (mode == EpisodeMode::cot) {
    if (task != TaskKind::math) throw ConfigError("no built-in cot prompt for task " + std::string(to_string(task)));
    return std::string(prompts::kMathCot);
  }
  switch (task) {
    case TaskKind::math: return std::string(prompts::kMath);
    case TaskKind::multihop_qa: return std::string(prompts::kMultihopQa);
    case TaskKind::strategy_qa: return std::string(prompts::kStrategyQa);
  }
  return {};
}

std::vector<Message> builtin_cot_examples() {
  auto j = nlohmann::json::parse(prompts::kMathCotExamples);
  std::vector<Message> out;
  for (const auto& m : j) out.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  return out;
}

std::string load_system_prompt(const std::filesystem::path& dir, TaskKind task, EpisodeMode mode) {
  std::string name(to_string(task));
  if (mode == EpisodeMode::cot) name += "_cot";
  return read_file(dir / (name + "." + std::string(kPromptVersion) + ".txt"));
}

const tools::ToolSet* ToolRegistry::find(TaskKind task) const {
  auto it = sets_.find(task);
  return it == sets_.end() ? nullptr : &it->second;
}

namespace {

std::string system_message(const Question& question, const EpisodeConfig& config) {
  std::string system = config.system_prompt ? *config.system_prompt : builtin_system_prompt(question.task, config.mode);
  while (!system.empty() && (system.back() == '\n' || system.back() == ' ')) system.pop_back();
  if (!config.icl_examples.empty()) {
    system += "\n\nExamples:";
    for (std::size_t i = 0; i + 1 < config.icl_examples.size(); i += 2) {
      system += "\n\nQuestion: " + config.icl_examples[i].content + "\n" + config.icl_examples[i + 1].content;
    }
  }
  return system;
}

std::string cut_at_stop(std::string text, const std::vector<std::string>& stops) {
  std::size_t cut = text.size();
  for (const auto& s : stops) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  text.resize(cut);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return text;
}

}  // namespace

Trajectory run_episode(const Question& question, ChatBackend& backend, const tools::ToolSet* tools,
                       const EpisodeConfig& config, int sample_index) {
  validate(config);
  if (config.mode == EpisodeMode::react && tools == nullptr)
    throw ConfigError("no tools registered for task " + std::string(to_string(question.task)));

  Trajectory t;
  t.question_id = question.id;
  t.task = question.task;
  t.model_id = backend.model_id();
  t.temperature = config.temperature;
  t.sample_index = sample_index;

  std::string query = question.text;
  if (config.query_prompt) query = attach_prompt(query, config.query_prompt->placement, config.query_prompt->text);
  t.messages.push_back({Role::system, system_message(question, config)});
  t.messages.push_back({Role::user, std::move(query)});

  auto ask = [&](int turn) -> std::optional<std::string> {
    CompletionRequest request;
    request.messages = t.messages;
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.stop = config.stop_sequences;
    request.question_id = question.id;
    request.turn_index = turn;
    request.sample_index = sample_index;
    try {
      auto text = cut_at_stop(backend.complete(request), config.stop_sequences);
      if (strings::trim(text).empty()) return std::nullopt;
      return text;
    } catch (const TransportError&) {
      return std::nullopt;
    }
  };

  auto finalize = [&](Outcome outcome) {
    t.outcome = std::move(outcome);
    t.assistant_turns = static_cast<int>(std::count_if(
        t.messages.begin(), t.messages.end(), [](const Message& m) { return m.role == Role::assistant; }));
    return t;
  };

  if (config.mode == EpisodeMode::cot) {
    auto text = ask(0);
    if (!text) return finalize(Outcome::of(OutcomeKind::tool_failure_abort));
    t.messages.push_back({Role::assistant, *text});
    if (parse_step(*text).is_unparseable()) {
      if (auto answer = extract_marked_answer(*text)) return finalize(Outcome::finished(*answer));
    }
    return finalize(Outcome::of(OutcomeKind::parse_failure));
  }

  int consecutive_unparseable = 0;
  for (int turn = 0; turn < config.max_turns; ++turn) {
    auto text = ask(turn);
    if (!text) return finalize(Outcome::of(OutcomeKind::tool_failure_abort));
    t.messages.push_back({Role::assistant, *text});
    auto step = parse_step(*text);

    if (const auto* finish = std::get_if<Finish>(&step.action)) return finalize(Outcome::finished(finish->answer));

    if (const auto* call = std::get_if<ToolCall>(&step.action)) {
      consecutive_unparseable = 0;
      tools::ObservationResult observation = tools::ObservationResult::error("tool failed");
      try {
        observation = tools->execute(call->tool, call->argument);
      } catch (const std::exception& e) {
        observation = tools::ObservationResult::error(e.what());
      }
      if (!observation.is_ok()) ++t.tool_call_errors;
      t.messages.push_back({Role::tool, observation.render()});
      continue;
    }

    ++t.tool_call_errors;
    t.messages.push_back({Role::tool, std::string(tools::kObservationPrefix) + std::string(kUnparseableFeedback)});
    if (++consecutive_unparseable == 2) return finalize(Outcome::of(OutcomeKind::parse_failure));
  }
  return finalize(Outcome::of(OutcomeKind::turn_limit_exceeded));
}

std::vector<Trajectory> collect(const std::vector<Question>& questions, ChatBackend& backend, const ToolRegistry& tools,
                                const CollectOptions& options) {
  if (options.temperatures.empty()) throw ConfigError("collect: at least one temperature is required");
  validate(options.episode);
  for (const auto& q : questions) {
    validate(q);
    if (options.episode.mode == EpisodeMode::react && tools.find(q.task) == nullptr)
      throw ConfigError("no tools registered for task " + std::string(to_string(q.task)));
  }

  const std::size_t slots = options.temperatures.size();
  const std::size_t total = questions.size() * slots;
  std::vector<Trajectory> out(total);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const auto& q = questions[i / slots];
      const auto slot = static_cast<int>(i % slots);
      EpisodeConfig config = options.episode;
      config.temperature = options.temperatures[i % slots];
      try {
        out[i] = run_episode(q, backend, tools.find(q.task), config, slot);
        if (options.on_episode) options.on_episode(out[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace nat::agent
