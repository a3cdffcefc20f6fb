#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace nat::agent {

struct ToolCall {
  std::string tool;
  std::string argument;
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct Finish {
  std::string answer;
  friend bool operator==(const Finish&, const Finish&) = default;
};

struct Unparseable {
  std::string raw;
  friend bool operator==(const Unparseable&, const Unparseable&) = default;
};

using Action = std::variant<ToolCall, Finish, Unparseable>;

struct ParsedStep {
  std::string thought;
  Action action;

  [[nodiscard]] bool is_finish() const noexcept { return std::holds_alternative<Finish>(action); }
  [[nodiscard]] bool is_tool_call() const noexcept { return std::holds_alternative<ToolCall>(action); }
  [[nodiscard]] bool is_unparseable() const noexcept {
    return std::holds_alternative<Unparseable>(action);
  }

  friend bool operator==(const ParsedStep&, const ParsedStep&) = default;
};

inline constexpr std::string_view kFinishAction = "finish";

/// Parses one ReAct step of the form
///
///   Thought: <free text, may span lines>
///   Action: <name>[<argument>]
///
/// The thought is optional. The argument may contain balanced square
/// brackets. Anything that does not fit this shape becomes Unparseable;
/// tool names are not checked here.
ParsedStep parse_step(std::string_view assistant_text);

/// Chain-of-thought answer: the text after the last "The answer is" up to
/// the end of that line, trimmed and stripped of trailing sentence punctuation (.,;:!?).
std::optional<std::string> extract_marked_answer(std::string_view text);

}  // namespace nat::agent
