#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nat/agent/backend.hpp"
#include "nat/agent/episode.hpp"
#include "nat/core/types.hpp"
#include "nat/reformat/reformat.hpp"

namespace nat::eval {

// Metric names used in reports.
inline constexpr std::string_view kAccuracy = "accuracy";
inline constexpr std::string_view kExactMatch = "em";
inline constexpr std::string_view kF1 = "f1";
inline constexpr std::string_view kActionErrorRate = "action_error_rate";
inline constexpr std::string_view kAvgTurns = "avg_turns";

/// One metric on one dataset across runs.
struct MetricSeries {
  std::string dataset;
  std::string metric;
  std::vector<double> runs;

  /// Arithmetic mean, computed exactly and rounded once.
  [[nodiscard]] double mean() const;
  /// Population standard deviation.
  [[nodiscard]] double stddev() const;
};

struct EvalReport {
  std::string strategy;
  std::string model_id;
  int n_runs = 0;
  std::vector<MetricSeries> metrics;

  [[nodiscard]] const MetricSeries* find(std::string_view dataset, std::string_view metric) const;
  /// Appends a series, or the runs of an existing one. Throws ValidationError
  /// when a series would end up with a run count other than n_runs.
  void merge(const EvalReport& other);
};

/// Throws ValidationError when a series has the wrong number of runs.
void validate(const EvalReport& report);

/// Greedy for math and strategy QA, 0.7 for multihop QA (multi-run protocol).
double default_eval_temperature(TaskKind task);
/// 5 runs for multihop QA, 1 otherwise.
int default_eval_runs(TaskKind task);

struct EvalOptions {
  /// Dataset column name in the report.
  std::string dataset = "test";
  unsigned workers = 1;
  /// Per-run trajectories are written here as <dataset>.run<k>.jsonl.
  std::optional<std::filesystem::path> audit_dir;
};

/// Runs every question n_runs times with the strategy's inference prompt
/// (never a negative-class prompt), labels the results and aggregates
/// accuracy (math, strategy QA) or EM and F1 (multihop QA), plus action
/// error rate and average turns. Run k uses sample_index k. An episode that
/// throws is recorded as an incorrect tool_failure_abort trajectory.
EvalReport evaluate(agent::ChatBackend& backend, std::span<const Question> testset,
                    const reformat::PromptStrategy& strategy, const agent::EpisodeConfig& config, int n_runs,
                    const agent::ToolRegistry& tools, const EvalOptions& options = {});

struct PerplexityResult {
  double perplexity = 0.0;
  double logprob_sum = 0.0;
  std::size_t token_count = 0;
};

/// exp(-mean log-probability) over the tokens of assistant messages, each
/// scored given the messages before it. System, user and tool tokens are
/// excluded. Throws CapabilityError when the backend has no log-probs and
/// ValidationError for negatives or an empty token set.
PerplexityResult perplexity(agent::ChatBackend& backend, std::span<const LabeledTrajectory> dev);

// ---- sweeps ----------------------------------------------------------------

enum class SweepAxis { n_pos, n_neg };
std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepPlan {
  /// The axis that varies; the other one is held at `fixed`.
  SweepAxis varying = SweepAxis::n_neg;
  std::size_t fixed = 0;
  std::vector<std::size_t> values;
  std::string strategy = "nat";
  std::uint64_t seed = 0;
  /// Metric columns; filled only when an evaluator is supplied.
  std::vector<std::string> datasets;
};

/// Throws ConfigError unless values are strictly ascending.
void validate(const SweepPlan& plan);

struct SweepRow {
  std::size_t axis_value = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  /// "ok" or the shortfall message.
  std::string status;
  std::filesystem::path dataset_file;
  std::size_t records = 0;
  std::map<reformat::ClassId, std::size_t> class_counts;
  std::size_t distinct_prompts = 0;
  /// dataset -> metric; missing entries render as "n/a".
  std::map<std::string, double> metrics;

  [[nodiscard]] bool ok() const { return status == "ok"; }
};

struct SweepResult {
  SweepPlan plan;
  reformat::PromptStrategy strategy;
  std::vector<SweepRow> rows;
};

/// Called for each successfully built grid point with the emitted dataset;
/// returns dataset -> metric. Failures leave the row's metrics empty.
using PointEvaluator = std::function<std::map<std::string, double>(const SweepRow& row)>;

/// Builds and emits one dataset per grid point into emit_dir. A shortfall
/// marks that row and the sweep continues; the row count always equals the
/// grid size.
SweepResult run_sweep(const SweepPlan& plan, const reformat::Pools& pools, const std::filesystem::path& emit_dir,
                      const PointEvaluator& evaluator = {});

/// Columns: axis, axis_value, n_pos, n_neg, status, records, one count per
/// class, distinct_prompts, then one column per dataset.
std::string sweep_csv(const SweepResult& result);

// ---- rendering -------------------------------------------------------------

enum class ReportFormat { table, csv };
ReportFormat parse_report_format(std::string_view text);

/// Strategy rows by (dataset, metric) columns plus an Average column; the
/// best value in each column is bolded. Diagnostics (action error, turns)
/// are left out of the table.
std::string render_table(std::span<const EvalReport> reports);

/// One row per run and a final "mean" row.
std::string render_csv(const EvalReport& report);

std::string render_report(std::span<const EvalReport> reports, ReportFormat format);

struct PlotScript {
  std::string data;
  std::string script;
};

/// gnuplot data file (axis value, record counts, metrics) and a script that
/// plots the sweep curve from `data_file_name`.
PlotScript render_plot_script(const SweepResult& result, std::string_view data_file_name);

/// RFC-4180 field quoting.
std::string csv_field(std::string_view text);
/// Shortest round-trip decimal for a metric value.
std::string format_number(double value);

}  // namespace nat::eval
