#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nat/agent/episode.hpp"
#include "nat/core/types.hpp"

namespace nat::labeling {

// ---- answer matching -------------------------------------------------------

/// SQuAD-style normalization: lower-case, drop punctuation, drop the
/// articles a/an/the as whole words, collapse whitespace.
std::string normalize_text(std::string_view s);

/// 1 iff the normalized strings are equal.
int exact_match(std::string_view pred, std::string_view gold);

/// Harmonic mean of token precision and recall over normalized whitespace
/// tokens (multiset overlap). Both empty gives 1.0; one empty gives 0.0.
double token_f1(std::string_view pred, std::string_view gold);

/// Compares a free-form numeric prediction ("$1,200", "18.0", "3/4", "72
/// apples") with an exact decimal gold value, within a relative tolerance
/// of 1e-6 (absolute below magnitude 1). Unparseable predictions are false.
bool numeric_match(std::string_view pred, std::string_view gold_decimal);

// ---- labeling --------------------------------------------------------------

/// React mode: the finish argument of a finished trajectory. Cot mode: the
/// text after the last "The answer is" marker.
std::optional<std::string> extract_answer(const Trajectory& trajectory, agent::EpisodeMode mode);

/// extract_answer with the mode inferred from the trajectory shape.
std::optional<std::string> extract_answer(const Trajectory& trajectory);

/// Labels against the gold answer. Math: numeric match, quality 0/1.
/// Multihop QA: quality = token F1, positive iff 1.0. Strategy QA: positive
/// iff the normalized prediction is "yes"/"no" and equals the gold.
/// Throws ValidationError when the ids differ.
LabeledTrajectory label_trajectory(const Trajectory& trajectory, const Question& question);

/// Labels every trajectory by question id; unknown ids raise ValidationError.
std::vector<LabeledTrajectory> label_all(std::span<const Trajectory> trajectories,
                                         std::span<const Question> questions);

// ---- quality classes -------------------------------------------------------

/// Class of a trajectory: kPositiveClass or a negative bucket index 0..k-1.
using ClassId = int;
inline constexpr ClassId kPositiveClass = -1;

std::string class_name(ClassId id);

/// Cut points splitting [0, 1) into half-open negative buckets
/// [0, b0), [b0, b1), ..., [b_last, 1). Quality 1.0 is always positive.
class QualityBuckets {
public:
  QualityBuckets() = default;
  /// Throws ConfigError unless the boundaries are strictly ascending in (0, 1).
  explicit QualityBuckets(std::vector<double> boundaries);

  [[nodiscard]] const std::vector<double>& boundaries() const noexcept { return boundaries_; }
  [[nodiscard]] int negative_class_count() const noexcept { return static_cast<int>(boundaries_.size()) + 1; }

  friend bool operator==(const QualityBuckets&, const QualityBuckets&) = default;

private:
  std::vector<double> boundaries_;
};

/// Throws ValidationError when quality is outside [0, 1].
ClassId bucket_quality(double quality, const QualityBuckets& buckets);

// ---- behaviour metrics -----------------------------------------------------

/// Percentage of tool-call attempts that failed. Attempts are tool messages
/// (observations, including unparseable-step feedback); errors are the
/// per-trajectory tool_call_errors tallies. No attempts gives 0.
double action_error_rate(std::span<const Trajectory> trajectories);

/// Mean assistant turns. Throws ValidationError for an empty list.
double avg_turns(std::span<const Trajectory> trajectories);

}  // namespace nat::labeling
