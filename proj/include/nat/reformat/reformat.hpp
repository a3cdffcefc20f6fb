#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nat/core/types.hpp"
#include "nat/labeling/labeling.hpp"

namespace nat::reformat {

using labeling::ClassId;
using labeling::kPositiveClass;
using labeling::QualityBuckets;

inline constexpr std::string_view kCorrectPrompt = "Please generate a solution that **correctly** answers the question.";
inline constexpr std::string_view kIncorrectPrompt =
    "Please generate a solution that **incorrectly** answers the question.";
inline constexpr std::string_view kMostlyCorrectPrompt =
    "Please generate a solution that is **mostly but not fully correct** in answering the question.";
inline constexpr std::string_view kGoodPrompt = "Please generate a **good** solution to the question.";
inline constexpr std::string_view kBadPrompt = "Please generate a **bad** solution to the question.";
// Drawn once (seed 0, 12 alphanumeric characters each) and frozen.
inline constexpr std::string_view kRandomPositive = "2yW4Acq9GFz6";
inline constexpr std::string_view kRandomNegative = "Y1t9EwL56nGi";

/// Maps trajectory classes to the text attached to the training query.
struct PromptStrategy {
  std::string name;
  Placement placement = Placement::suffix;
  /// Empty for strategies that add no text. Otherwise one entry for
  /// kPositiveClass and one per negative bucket.
  std::map<ClassId, std::string> class_prompts;
  QualityBuckets buckets;
  bool uses_negatives = true;

  /// The text used at inference time (the positive-class prompt, or empty).
  [[nodiscard]] std::string inference_prompt() const;
  /// The prompt for `cls`; empty when the strategy adds no text.
  [[nodiscard]] std::string prompt_for(ClassId cls) const;
};

/// Throws ConfigError when prompts and buckets are inconsistent.
void validate(const PromptStrategy& strategy);

/// vanilla, nut, nat, nat_swapped, nat_goodbad, nat_letters, nat_random, nat2.
std::vector<PromptStrategy> builtin_strategies();

/// Case-insensitive lookup; '-' and '_' are interchangeable. Throws ConfigError.
PromptStrategy find_strategy(std::string_view name);

enum class PromptRole { train, inference };

struct RecordMeta {
  std::string source;
  Label label = Label::negative;
  double quality = 0.0;
  std::string strategy;
  ClassId cls = kPositiveClass;

  friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct DatasetRecord {
  std::vector<Message> messages;
  /// One flag per message; true only on assistant messages.
  std::vector<bool> loss_mask;
  RecordMeta meta;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// Reformats a labeled trajectory. Training: negatives are dropped by
/// strategies that do not use them; otherwise the class prompt is attached
/// to the user message. Inference: the positive prompt is attached whatever
/// the label.
std::optional<DatasetRecord> apply_strategy(const LabeledTrajectory& lt, const PromptStrategy& strategy, PromptRole role);

/// Class of a labeled trajectory under the strategy's buckets.
ClassId trajectory_class(const LabeledTrajectory& lt, const PromptStrategy& strategy);

/// Multihop QA: drops negatives that did not finish or scored F1 0.
/// Math and strategy QA: drops negatives ending in parse_failure or
/// tool_failure_abort. Positives always pass.
std::vector<LabeledTrajectory> filter_negatives(std::span<const LabeledTrajectory> pool, TaskKind task);

/// Keeps one positive per question (lowest temperature, then lowest
/// sample_index). Negatives and relative order are untouched.
std::vector<LabeledTrajectory> dedup_positives(std::span<const LabeledTrajectory> pool);

struct Pools {
  std::vector<LabeledTrajectory> positives;
  std::vector<LabeledTrajectory> negatives;
};

/// Splits by label, dedups positives and filters negatives per task.
Pools prepare_pools(std::span<const LabeledTrajectory> labeled);

/// Deterministic sampling: Fisher-Yates over mt19937_64 with rejection
/// sampling, so results do not depend on the standard library vendor.
class SeededShuffler {
public:
  explicit SeededShuffler(std::uint64_t seed);
  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }
  /// `count` distinct indices out of [0, n), in draw order.
  std::vector<std::size_t> sample(std::size_t n, std::size_t count);

private:
  std::mt19937_64 engine_;
};

/// Samples n_pos positives and n_neg negatives without replacement, applies
/// the strategy (train role) and shuffles the result, all from one seed.
/// Throws ValidationError on a shortfall or on negatives with a
/// positives-only strategy.
std::vector<DatasetRecord> build_mixture(std::span<const LabeledTrajectory> positives,
                                         std::span<const LabeledTrajectory> negatives, std::size_t n_pos,
                                         std::size_t n_neg, const PromptStrategy& strategy, std::uint64_t seed);

// Dataset JSONL: {"messages":[{"role","content","train"}...],
//                 "meta":{"source","label","quality","strategy","class"}}
std::string to_json_line(const DatasetRecord& record);
void emit_dataset(std::span<const DatasetRecord> records, std::ostream& out);
std::vector<DatasetRecord> read_dataset(std::istream& in);

}  // namespace nat::reformat
