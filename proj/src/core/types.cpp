#include "nat/core/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "nat/agent/parse.hpp"
#include "nat/core/error.hpp"

namespace nat {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " \"" + std::string(text) + "\"");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, TaskKind>, 3> kTasks{{
    {"math", TaskKind::math},
    {"multihop_qa", TaskKind::multihop_qa},
    {"strategy_qa", TaskKind::strategy_qa},
}};

constexpr std::array<std::pair<std::string_view, Role>, 4> kRoles{{
    {"system", Role::system},
    {"user", Role::user},
    {"assistant", Role::assistant},
    {"tool", Role::tool},
}};

constexpr std::array<std::pair<std::string_view, OutcomeKind>, 4> kOutcomes{{
    {"finished", OutcomeKind::finished},
    {"turn_limit_exceeded", OutcomeKind::turn_limit_exceeded},
    {"parse_failure", OutcomeKind::parse_failure},
    {"tool_failure_abort", OutcomeKind::tool_failure_abort},
}};

constexpr std::array<std::pair<std::string_view, Label>, 2> kLabels{{
    {"positive", Label::positive},
    {"negative", Label::negative},
}};

[[noreturn]] void invalid(std::string_view field, std::string_view problem) {
  throw ValidationError(std::string(field) + ": " + std::string(problem));
}

}  // namespace

std::string_view to_string(TaskKind task) { return enum_name(task, kTasks); }
TaskKind parse_task_kind(std::string_view text) { return parse_enum(text, kTasks, "task"); }
std::string_view to_string(Role role) { return enum_name(role, kRoles); }
Role parse_role(std::string_view text) { return parse_enum(text, kRoles, "role"); }
std::string_view to_string(OutcomeKind kind) { return enum_name(kind, kOutcomes); }
OutcomeKind parse_outcome_kind(std::string_view text) { return parse_enum(text, kOutcomes, "outcome"); }
std::string_view to_string(Label label) { return enum_name(label, kLabels); }
Label parse_label(std::string_view text) { return parse_enum(text, kLabels, "label"); }

std::string gold_text(const GoldAnswer& gold) {
  struct Visitor {
    std::string operator()(const NumericGold& g) const { return g.decimal; }
    std::string operator()(const TextGold& g) const { return g.text; }
    std::string operator()(const BooleanGold& g) const { return g.value ? "yes" : "no"; }
  };
  return std::visit(Visitor{}, gold);
}

bool is_decimal_literal(std::string_view text) {
  std::size_t i = 0;
  if (i < text.size() && text[i] == '-') ++i;
  std::size_t int_digits = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i, ++int_digits;
  if (int_digits == 0) return false;
  if (i == text.size()) return true;
  if (text[i] != '.') return false;
  ++i;
  std::size_t frac_digits = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i, ++frac_digits;
  return frac_digits > 0 && i == text.size();
}

std::string_view to_string(Placement placement) {
  return placement == Placement::suffix ? "suffix" : "prefix";
}

std::string attach_prompt(std::string_view query, Placement placement, std::string_view prompt) {
  if (prompt.empty()) return std::string(query);
  std::string out;
  if (placement == Placement::suffix) {
    out.append(query).append("\n").append(prompt);
  } else {
    out.append(prompt).append("\n").append(query);
  }
  return out;
}

std::string Trajectory::source_id() const { return question_id + "#" + std::to_string(sample_index); }

std::size_t Trajectory::tool_message_count() const {
  return static_cast<std::size_t>(std::count_if(messages.begin(), messages.end(),
                                                [](const Message& m) { return m.role == Role::tool; }));
}

void validate(const Question& question) {
  if (question.id.empty()) invalid("id", "must be non-empty");
  if (question.text.empty()) invalid("question", "must be non-empty");
  switch (question.task) {
    case TaskKind::math: {
      const auto* numeric = std::get_if<NumericGold>(&question.gold);
      if (!numeric) invalid("answer", "math questions need a numeric gold answer");
      if (!is_decimal_literal(numeric->decimal)) invalid("answer", "not a decimal literal");
      break;
    }
    case TaskKind::multihop_qa:
      if (!std::holds_alternative<TextGold>(question.gold))
        invalid("answer", "multihop_qa questions need a text gold answer");
      break;
    case TaskKind::strategy_qa:
      if (!std::holds_alternative<BooleanGold>(question.gold))
        invalid("answer", "strategy_qa questions need a yes/no gold answer");
      break;
  }
}

void validate(const Message& message) {
  if ((message.role == Role::assistant || message.role == Role::tool) && message.content.empty()) {
    invalid("messages.content", "empty " + std::string(to_string(message.role)) + " message");
  }
}

bool is_cot_shaped(const Trajectory& trajectory) {
  const auto& m = trajectory.messages;
  return m.size() == 3 && m[0].role == Role::system && m[1].role == Role::user &&
         m[2].role == Role::assistant && agent::parse_step(m[2].content).is_unparseable();
}

void validate(const Trajectory& t) {
  if (t.question_id.empty()) invalid("question_id", "must be non-empty");
  if (!std::isfinite(t.temperature) || t.temperature < 0.0 || t.temperature > 2.0)
    invalid("temperature", "out of range [0, 2]");
  if (t.sample_index < 0) invalid("sample_index", "must be >= 0");
  if (t.tool_call_errors < 0) invalid("tool_call_errors", "must be >= 0");

  const auto& msgs = t.messages;
  if (msgs.size() < 2 || msgs[0].role != Role::system || msgs[1].role != Role::user)
    invalid("messages", "must begin with one system message followed by one user message");

  int assistants = 0;
  int tools = 0;
  for (std::size_t i = 2; i < msgs.size(); ++i) {
    validate(msgs[i]);
    const Role expected = (i - 2) % 2 == 0 ? Role::assistant : Role::tool;
    if (msgs[i].role != expected)
      invalid("messages", "assistant and tool messages must alternate (index " + std::to_string(i) + ")");
    if (expected == Role::assistant) {
      ++assistants;
    } else {
      ++tools;
      if (agent::parse_step(msgs[i - 1].content).is_finish())
        invalid("messages", "tool message follows a finish action (index " + std::to_string(i) + ")");
    }
  }
  if (t.assistant_turns != assistants) invalid("assistant_turns", "does not match assistant message count");
  if (t.tool_call_errors > tools) invalid("tool_call_errors", "exceeds the number of tool messages");

  const bool ends_with_assistant = msgs.back().role == Role::assistant;
  if (t.outcome.is_finished()) {
    if (!ends_with_assistant) invalid("outcome", "finished trajectory must end with an assistant message");
    if (is_cot_shaped(t)) {
      if (msgs.back().content.find(kCotAnswerMarker) == std::string::npos)
        invalid("outcome", "finished chain-of-thought trajectory lacks an answer marker");
    } else {
      auto step = agent::parse_step(msgs.back().content);
      const auto* finish = std::get_if<agent::Finish>(&step.action);
      if (!finish) invalid("outcome", "finished trajectory must end with a finish action");
      if (finish->answer != t.outcome.answer) invalid("outcome", "answer differs from the finish action");
    }
  } else {
    if (!t.outcome.answer.empty()) invalid("outcome", "only finished outcomes carry an answer");
    if (ends_with_assistant && !is_cot_shaped(t) && agent::parse_step(msgs.back().content).is_finish())
      invalid("outcome", "trajectory ends with a finish action but is not finished");
  }
}

void validate(const LabeledTrajectory& lt) {
  validate(lt.trajectory);
  if (!std::isfinite(lt.quality) || lt.quality < 0.0 || lt.quality > 1.0) invalid("quality", "quality out of range");
  if (lt.positive() && lt.quality != 1.0) invalid("quality", "positive trajectories must have quality 1.0");
  if (!lt.positive() && lt.quality == 1.0) invalid("quality", "negative trajectories must have quality below 1.0");
  if (lt.trajectory.task != TaskKind::multihop_qa && lt.quality != 0.0 && lt.quality != 1.0)
    invalid("quality", "must be 0 or 1 for math and strategy_qa");
}

}  // namespace nat
