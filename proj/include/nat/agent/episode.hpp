#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nat/agent/backend.hpp"
#include "nat/core/types.hpp"
#include "nat/tools/toolset.hpp"

namespace nat::agent {

enum class EpisodeMode { react, cot };

std::string_view to_string(EpisodeMode mode);
EpisodeMode parse_episode_mode(std::string_view text);

/// Text attached to the user query (inference-time strategy prompt).
struct QueryPrompt {
  Placement placement = Placement::suffix;
  std::string text;
};

inline constexpr int kDefaultMaxTurns = 8;
inline constexpr std::string_view kPromptVersion = "v1";
inline constexpr std::string_view kUnparseableFeedback = "Could not parse action. Use Action: tool[input].";

struct EpisodeConfig {
  int max_turns = kDefaultMaxTurns;
  EpisodeMode mode = EpisodeMode::react;
  double temperature = 0.0;
  int max_tokens = 512;
  std::vector<std::string> stop_sequences{"\nObservation:"};
  /// Alternating user/assistant demonstrations; chain-of-thought mode only.
  std::vector<Message> icl_examples;
  /// Overrides the built-in per-task system prompt when set.
  std::optional<std::string> system_prompt;
  std::optional<QueryPrompt> query_prompt;
};

/// Default chain-of-thought configuration: three built-in demonstrations.
EpisodeConfig cot_config();

/// Throws ConfigError when the configuration is inconsistent.
void validate(const EpisodeConfig& config);

/// Built-in system prompt for a task (versioned files under prompts/).
std::string builtin_system_prompt(TaskKind task, EpisodeMode mode);
/// The three built-in chain-of-thought demonstrations as user/assistant pairs.
std::vector<Message> builtin_cot_examples();
/// Loads "<task>.<version>.txt" (or "<task>_cot.<version>.txt") from `dir`.
std::string load_system_prompt(const std::filesystem::path& dir, TaskKind task, EpisodeMode mode);

/// Tool sets available per task kind.
class ToolRegistry {
public:
  void set(TaskKind task, tools::ToolSet tools) { sets_.insert_or_assign(task, std::move(tools)); }
  [[nodiscard]] const tools::ToolSet* find(TaskKind task) const;

private:
  std::map<TaskKind, tools::ToolSet> sets_;
};

/// Runs one episode. ReAct mode loops: ask the backend, parse the step,
/// run the tool and append "Observation: ..." until a finish action, the
/// turn limit, or two unparseable steps in a row. Tool errors and
/// unparseable steps are fed back and counted in tool_call_errors. A
/// backend TransportError (or an empty completion) ends the episode with
/// tool_failure_abort. Chain-of-thought mode makes a single completion and
/// finishes iff it contains "The answer is".
Trajectory run_episode(const Question& question, ChatBackend& backend, const tools::ToolSet* tools,
                       const EpisodeConfig& config, int sample_index = 0);

inline const std::vector<double> kDefaultTemperatures{0.2, 0.5, 0.7};

struct CollectOptions {
  std::vector<double> temperatures = kDefaultTemperatures;
  EpisodeConfig episode;
  unsigned workers = 1;
  /// Called after each finished episode (from worker threads).
  std::function<void(const Trajectory&)> on_episode;
};

/// Runs every question at every temperature. Output order is question-major,
/// temperature-minor; sample_index is the temperature slot. Episode failures
/// are recorded in outcomes and never abort the batch.
std::vector<Trajectory> collect(const std::vector<Question>& questions, ChatBackend& backend,
                                const ToolRegistry& tools, const CollectOptions& options);

}  // namespace nat::agent
