#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nat {

enum class TaskKind { math, multihop_qa, strategy_qa };

std::string_view to_string(TaskKind task);
TaskKind parse_task_kind(std::string_view text);

/// Numeric gold answer kept as the literal decimal string from the source data.
struct NumericGold {
  std::string decimal;
  friend bool operator==(const NumericGold&, const NumericGold&) = default;
};

struct TextGold {
  std::string text;
  friend bool operator==(const TextGold&, const TextGold&) = default;
};

struct BooleanGold {
  bool value = false;
  friend bool operator==(const BooleanGold&, const BooleanGold&) = default;
};

using GoldAnswer = std::variant<NumericGold, TextGold, BooleanGold>;

/// Gold answer as the string used for matching ("yes"/"no" for booleans).
std::string gold_text(const GoldAnswer& gold);

/// True for "-12", "3.5", "0.25"; no exponent, no grouping separators.
bool is_decimal_literal(std::string_view text);

struct Question {
  std::string id;
  std::string text;
  GoldAnswer gold;
  TaskKind task = TaskKind::math;

  friend bool operator==(const Question&, const Question&) = default;
};

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct Message {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

enum class OutcomeKind { finished, turn_limit_exceeded, parse_failure, tool_failure_abort };

std::string_view to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(std::string_view text);

struct Outcome {
  OutcomeKind kind = OutcomeKind::finished;
  /// Final answer text; only meaningful when kind == finished.
  std::string answer;

  static Outcome finished(std::string answer) { return {OutcomeKind::finished, std::move(answer)}; }
  static Outcome of(OutcomeKind kind) { return {kind, {}}; }

  [[nodiscard]] bool is_finished() const noexcept { return kind == OutcomeKind::finished; }

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct Trajectory {
  std::string question_id;
  TaskKind task = TaskKind::math;
  std::vector<Message> messages;
  Outcome outcome;
  std::string model_id;
  double temperature = 0.0;
  int sample_index = 0;
  int tool_call_errors = 0;
  int assistant_turns = 0;

  /// Stable identifier used as dataset provenance: "<question_id>#<sample_index>".
  [[nodiscard]] std::string source_id() const;
  [[nodiscard]] std::size_t tool_message_count() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class Label { positive, negative };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct LabeledTrajectory {
  Trajectory trajectory;
  Label label = Label::negative;
  double quality = 0.0;
  std::optional<std::string> extracted_answer;

  [[nodiscard]] bool positive() const noexcept { return label == Label::positive; }

  friend bool operator==(const LabeledTrajectory&, const LabeledTrajectory&) = default;
};

/// Where a class prompt is attached to the query text.
enum class Placement { suffix, prefix };

std::string_view to_string(Placement placement);

/// Suffix: "<query>\n<prompt>"; prefix: "<prompt>\n<query>". An empty
/// prompt leaves the query untouched.
std::string attach_prompt(std::string_view query, Placement placement, std::string_view prompt);

// Invariant checks. Each throws ValidationError naming the offending field.
void validate(const Question& question);
void validate(const Message& message);
void validate(const Trajectory& trajectory);
void validate(const LabeledTrajectory& labeled);

/// Marker that introduces the final answer in a chain-of-thought completion.
inline constexpr std::string_view kCotAnswerMarker = "The answer is";

/// A trajectory produced by a single chain-of-thought completion:
/// system, user, one assistant message, no tool messages, no action syntax.
bool is_cot_shaped(const Trajectory& trajectory);

}  // namespace nat
