#include "nat/eval/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include <boost/multiprecision/cpp_int.hpp>

#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/labeling/labeling.hpp"

namespace nat::eval {

namespace mp = boost::multiprecision;

namespace {

// Exact sum of doubles, scaled and divided, rounded once.
double exact_mean(std::span<const double> values, double scale = 1.0) {
  if (values.empty()) return 0.0;
  mp::cpp_rational sum = 0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("metric value is not finite");
    sum += mp::cpp_rational(v);
  }
  sum *= mp::cpp_rational(scale);
  sum /= static_cast<long long>(values.size());
  return sum.convert_to<double>();
}

}  // namespace

double MetricSeries::mean() const { return exact_mean(runs); }

double MetricSeries::stddev() const {
  if (runs.empty()) return 0.0;
  const double m = mean();
  std::vector<double> sq;
  sq.reserve(runs.size());
  for (double v : runs) sq.push_back((v - m) * (v - m));
  return std::sqrt(exact_mean(sq));
}

const MetricSeries* EvalReport::find(std::string_view dataset, std::string_view metric) const {
  for (const auto& s : metrics) {
    if (s.dataset == dataset && s.metric == metric) return &s;
  }
  return nullptr;
}

void EvalReport::merge(const EvalReport& other) {
  if (n_runs != other.n_runs) throw ValidationError("n_runs: cannot merge reports with different run counts");
  for (const auto& s : other.metrics) {
    if (find(s.dataset, s.metric) != nullptr)
      throw ValidationError("metrics: duplicate series " + s.dataset + "/" + s.metric);
    metrics.push_back(s);
  }
}

void validate(const EvalReport& report) {
  if (report.n_runs < 1) throw ValidationError("n_runs: must be >= 1");
  for (const auto& s : report.metrics) {
    if (static_cast<int>(s.runs.size()) != report.n_runs)
      throw ValidationError("metrics: " + s.dataset + "/" + s.metric + " has " + std::to_string(s.runs.size()) +
                            " runs, expected " + std::to_string(report.n_runs));
  }
}

double default_eval_temperature(TaskKind task) { return task == TaskKind::multihop_qa ? 0.7 : 0.0; }

int default_eval_runs(TaskKind task) { return task == TaskKind::multihop_qa ? 5 : 1; }

namespace {

Trajectory aborted_trajectory(const Question& q, const agent::EpisodeConfig& config, const std::string& model_id,
                              int sample_index) {
  Trajectory t;
  t.question_id = q.id;
  t.task = q.task;
  t.model_id = model_id;
  t.temperature = config.temperature;
  t.sample_index = sample_index;
  t.outcome = Outcome::of(OutcomeKind::tool_failure_abort);
  std::string system = config.system_prompt ? *config.system_prompt : agent::builtin_system_prompt(q.task, config.mode);
  t.messages.push_back({Role::system, std::move(system)});
  t.messages.push_back({Role::user, q.text});
  return t;
}

std::vector<Trajectory> run_once(agent::ChatBackend& backend, std::span<const Question> testset,
                                 const agent::EpisodeConfig& config, const agent::ToolRegistry& tools, int run,
                                 unsigned workers) {
  std::vector<Trajectory> out(testset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < testset.size(); i = next++) {
      const auto& q = testset[i];
      try {
        out[i] = agent::run_episode(q, backend, tools.find(q.task), config, run);
      } catch (const std::exception&) {
        out[i] = aborted_trajectory(q, config, backend.model_id(), run);
      }
    }
  };
  const unsigned n = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(std::max<std::size_t>(testset.size(), 1)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace

EvalReport evaluate(agent::ChatBackend& backend, std::span<const Question> testset,
                    const reformat::PromptStrategy& strategy, const agent::EpisodeConfig& config, int n_runs,
                    const agent::ToolRegistry& tools, const EvalOptions& options) {
  if (n_runs < 1) throw ValidationError("n_runs: must be >= 1");
  if (testset.empty()) throw ValidationError("testset: no questions");
  reformat::validate(strategy);
  agent::validate(config);
  const TaskKind task = testset.front().task;
  for (const auto& q : testset) {
    validate(q);
    if (q.task != task) throw ValidationError("testset: mixes task kinds");
  }
  if (config.mode == agent::EpisodeMode::react && tools.find(task) == nullptr)
    throw ConfigError("no tools registered for task " + std::string(to_string(task)));

  agent::EpisodeConfig run_config = config;
  run_config.query_prompt.reset();
  if (auto prompt = strategy.inference_prompt(); !prompt.empty())
    run_config.query_prompt = agent::QueryPrompt{strategy.placement, std::move(prompt)};

  EvalReport report;
  report.strategy = strategy.name;
  report.model_id = backend.model_id();
  report.n_runs = n_runs;
  std::vector<std::string> names;
  if (task == TaskKind::multihop_qa) {
    names = {std::string(kExactMatch), std::string(kF1)};
  } else {
    names = {std::string(kAccuracy)};
  }
  names.emplace_back(kActionErrorRate);
  names.emplace_back(kAvgTurns);
  for (const auto& n : names) report.metrics.push_back({options.dataset, n, {}});
  auto series = [&](std::string_view metric) -> std::vector<double>& {
    for (auto& s : report.metrics) {
      if (s.metric == metric) return s.runs;
    }
    throw std::logic_error("missing series");
  };

  if (options.audit_dir) std::filesystem::create_directories(*options.audit_dir);

  for (int run = 0; run < n_runs; ++run) {
    auto trajectories = run_once(backend, testset, run_config, tools, run, options.workers);
    std::vector<LabeledTrajectory> labeled;
    labeled.reserve(trajectories.size());
    std::vector<double> em;
    std::vector<double> f1;
    std::vector<double> correct;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      labeled.push_back(labeling::label_trajectory(trajectories[i], testset[i]));
      const auto& lt = labeled.back();
      if (task == TaskKind::multihop_qa) {
        const auto& gold = std::get<TextGold>(testset[i].gold).text;
        em.push_back(lt.extracted_answer ? labeling::exact_match(*lt.extracted_answer, gold) : 0.0);
        f1.push_back(lt.extracted_answer ? labeling::token_f1(*lt.extracted_answer, gold) : 0.0);
      } else {
        correct.push_back(lt.positive() ? 1.0 : 0.0);
      }
    }
    if (task == TaskKind::multihop_qa) {
      series(kExactMatch).push_back(exact_mean(em, 100.0));
      series(kF1).push_back(exact_mean(f1, 100.0));
    } else {
      series(kAccuracy).push_back(exact_mean(correct, 100.0));
    }
    series(kActionErrorRate).push_back(labeling::action_error_rate(trajectories));
    series(kAvgTurns).push_back(labeling::avg_turns(trajectories));

    if (options.audit_dir) {
      std::ostringstream out;
      write_trajectories(labeled, out);
      write_file_atomic(*options.audit_dir / (options.dataset + ".run" + std::to_string(run) + ".jsonl"), out.str());
    }
  }
  return report;
}

PerplexityResult perplexity(agent::ChatBackend& backend, std::span<const LabeledTrajectory> dev) {
  if (!backend.supports_logprobs())
    throw CapabilityError("backend " + backend.id() + " does not expose token log-probabilities");
  if (dev.empty()) throw ValidationError("perplexity: no dev trajectories");
  PerplexityResult result;
  for (const auto& lt : dev) {
    if (!lt.positive())
      throw ValidationError("perplexity: dev trajectory " + lt.trajectory.source_id() + " is not positive");
    const auto& msgs = lt.trajectory.messages;
    for (std::size_t i = 0; i < msgs.size(); ++i) {
      if (msgs[i].role != Role::assistant) continue;
      std::vector<Message> context(msgs.begin(), msgs.begin() + static_cast<std::ptrdiff_t>(i));
      for (double lp : backend.token_logprobs(context, msgs[i].content)) {
        result.logprob_sum += lp;
        ++result.token_count;
      }
    }
  }
  if (result.token_count == 0) throw ValidationError("perplexity: no assistant tokens");
  result.perplexity = std::exp(-result.logprob_sum / static_cast<double>(result.token_count));
  return result;
}

// ---- sweeps ----------------------------------------------------------------

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::n_pos ? "n_pos" : "n_neg"; }

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "n_pos" || text == "n-pos") return SweepAxis::n_pos;
  if (text == "n_neg" || text == "n-neg") return SweepAxis::n_neg;
  throw ConfigError("unknown sweep axis \"" + std::string(text) + "\" (expected n_pos or n_neg)");
}

void validate(const SweepPlan& plan) {
  for (std::size_t i = 1; i < plan.values.size(); ++i) {
    if (!(plan.values[i] > plan.values[i - 1])) throw ConfigError("sweep values must be strictly ascending");
  }
  std::set<std::string> seen;
  for (const auto& d : plan.datasets) {
    if (d.empty() || !seen.insert(d).second) throw ConfigError("sweep datasets must be distinct and non-empty");
  }
}

SweepResult run_sweep(const SweepPlan& plan, const reformat::Pools& pools, const std::filesystem::path& emit_dir,
                      const PointEvaluator& evaluator) {
  validate(plan);
  SweepResult result;
  result.plan = plan;
  result.strategy = reformat::find_strategy(plan.strategy);
  if (!plan.values.empty()) std::filesystem::create_directories(emit_dir);

  for (auto value : plan.values) {
    SweepRow row;
    row.axis_value = value;
    row.n_pos = plan.varying == SweepAxis::n_pos ? value : plan.fixed;
    row.n_neg = plan.varying == SweepAxis::n_neg ? value : plan.fixed;
    try {
      auto records = reformat::build_mixture(pools.positives, pools.negatives, row.n_pos, row.n_neg, result.strategy,
                                             plan.seed);
      row.dataset_file = emit_dir / (result.strategy.name + "_pos" + std::to_string(row.n_pos) + "_neg" +
                                     std::to_string(row.n_neg) + ".jsonl");
      std::ostringstream out;
      reformat::emit_dataset(records, out);
      write_file_atomic(row.dataset_file, out.str());
      row.records = records.size();
      std::set<std::string> prompts;
      for (const auto& r : records) {
        ++row.class_counts[r.meta.cls];
        if (auto p = result.strategy.prompt_for(r.meta.cls); !p.empty()) prompts.insert(std::move(p));
      }
      row.distinct_prompts = prompts.size();
      row.status = "ok";
    } catch (const ValidationError& e) {
      row.status = e.what();
    }
    if (row.ok() && evaluator) {
      try {
        row.metrics = evaluator(row);
      } catch (const std::exception& e) {
        row.status = std::string("evaluation failed: ") + e.what();
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

std::vector<reformat::ClassId> class_columns(const reformat::PromptStrategy& strategy) {
  std::vector<reformat::ClassId> out{reformat::kPositiveClass};
  for (int k = 0; k < strategy.buckets.negative_class_count(); ++k) out.push_back(k);
  return out;
}

std::string metric_or_na(const SweepRow& row, const std::string& dataset) {
  auto it = row.metrics.find(dataset);
  return it == row.metrics.end() ? "n/a" : format_number(it->second);
}

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  const auto classes = class_columns(result.strategy);
  std::vector<std::string> header{"axis", "axis_value", "n_pos", "n_neg", "status", "records"};
  for (auto c : classes) header.push_back("class_" + labeling::class_name(c));
  header.emplace_back("distinct_prompts");
  for (const auto& d : result.plan.datasets) header.push_back(d);

  std::string out;
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(fields[i]);
    }
    out += "\r\n";
  };
  emit(header);
  for (const auto& row : result.rows) {
    std::vector<std::string> fields{std::string(to_string(result.plan.varying)), std::to_string(row.axis_value),
                                    std::to_string(row.n_pos), std::to_string(row.n_neg), row.status,
                                    std::to_string(row.records)};
    for (auto c : classes) {
      auto it = row.class_counts.find(c);
      fields.push_back(std::to_string(it == row.class_counts.end() ? 0 : it->second));
    }
    fields.push_back(std::to_string(row.distinct_prompts));
    for (const auto& d : result.plan.datasets) fields.push_back(metric_or_na(row, d));
    emit(fields);
  }
  return out;
}

// ---- rendering -------------------------------------------------------------

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::table;
  if (text == "csv") return ReportFormat::csv;
  throw ConfigError("unknown report format \"" + std::string(text) + "\" (expected table or csv)");
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ValidationError("cannot format number");
  return std::string(buf, end);
}

namespace {

bool is_diagnostic(const MetricSeries& s) { return s.metric == kActionErrorRate || s.metric == kAvgTurns; }

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_table(std::span<const EvalReport> reports) {
  std::vector<std::pair<std::string, std::string>> columns;
  for (const auto& r : reports) {
    validate(r);
    for (const auto& s : r.metrics) {
      if (is_diagnostic(s)) continue;
      std::pair key{s.dataset, s.metric};
      if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    }
  }

  // cells[row][col], with the average as the last column
  std::vector<std::vector<std::optional<double>>> cells;
  for (const auto& r : reports) {
    std::vector<std::optional<double>> row;
    std::vector<double> present;
    for (const auto& [dataset, metric] : columns) {
      if (const auto* s = r.find(dataset, metric)) {
        row.emplace_back(s->mean());
        present.push_back(s->mean());
      } else {
        row.emplace_back(std::nullopt);
      }
    }
    row.emplace_back(present.empty() ? std::nullopt : std::optional<double>(exact_mean(present)));
    cells.push_back(std::move(row));
  }

  const std::size_t ncols = columns.size() + 1;
  std::vector<std::optional<double>> best(ncols);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < ncols; ++c) {
      if (row[c] && (!best[c] || *row[c] > *best[c])) best[c] = row[c];
    }
  }

  std::string out = "| Strategy |";
  for (const auto& [dataset, metric] : columns) out += " " + dataset + " " + metric + " |";
  out += " Average |\n|---|";
  for (std::size_t c = 0; c < ncols; ++c) out += "---:|";
  out += "\n";
  for (std::size_t r = 0; r < reports.size(); ++r) {
    out += "| " + reports[r].strategy + " |";
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto& v = cells[r][c];
      if (!v) {
        out += " - |";
        continue;
      }
      auto text = fixed2(*v);
      if (best[c] && text == fixed2(*best[c])) text = "**" + text + "**";
      out += " " + text + " |";
    }
    out += "\n";
  }
  return out;
}

std::string render_csv(const EvalReport& report) {
  validate(report);
  std::string out = "strategy,run";
  for (const auto& s : report.metrics) out += "," + csv_field(s.dataset + "/" + s.metric);
  out += "\r\n";
  for (int run = 0; run < report.n_runs; ++run) {
    out += csv_field(report.strategy) + "," + std::to_string(run + 1);
    for (const auto& s : report.metrics) out += "," + format_number(s.runs[static_cast<std::size_t>(run)]);
    out += "\r\n";
  }
  out += csv_field(report.strategy) + ",mean";
  for (const auto& s : report.metrics) out += "," + format_number(s.mean());
  out += "\r\n";
  return out;
}

std::string render_report(std::span<const EvalReport> reports, ReportFormat format) {
  if (format == ReportFormat::table) return render_table(reports);
  std::string out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto part = render_csv(reports[i]);
    // header only once when the layouts agree
    if (i > 0) {
      auto first_break = part.find("\r\n");
      if (part.substr(0, first_break) != out.substr(0, out.find("\r\n")))
        throw ValidationError("csv: reports have different metric columns");
      part.erase(0, first_break + 2);
    }
    out += part;
  }
  return out;
}

PlotScript render_plot_script(const SweepResult& result, std::string_view data_file_name) {
  const auto& plan = result.plan;
  const std::string axis(to_string(plan.varying));
  const std::string fixed_axis(to_string(plan.varying == SweepAxis::n_pos ? SweepAxis::n_neg : SweepAxis::n_pos));

  PlotScript plot;
  plot.data = "# " + axis + " n_pos n_neg records";
  for (const auto& d : plan.datasets) plot.data += " " + d;
  plot.data += "\n";
  for (const auto& row : result.rows) {
    plot.data += std::to_string(row.axis_value) + " " + std::to_string(row.n_pos) + " " + std::to_string(row.n_neg) +
                 " " + (row.ok() ? std::to_string(row.records) : std::string("n/a"));
    for (const auto& d : plan.datasets) plot.data += " " + metric_or_na(row, d);
    plot.data += "\n";
  }

  const std::string file = "\"" + std::string(data_file_name) + "\"";
  auto& s = plot.script;
  s += "# " + result.strategy.name + " sweep over " + axis + ", " + fixed_axis + " = " + std::to_string(plan.fixed) +
       "\n";
  s += "set datafile missing \"n/a\"\n";
  s += "set title \"" + result.strategy.name + " (" + fixed_axis + " = " + std::to_string(plan.fixed) + ")\"\n";
  s += "set xlabel \"" + axis + "\"\n";
  s += "set key left top\n";
  s += "set grid\n";
  if (plan.datasets.empty()) {
    s += "set ylabel \"records\"\n";
    s += "plot " + file + " using 1:4 with linespoints title \"records\"\n";
  } else {
    s += "set ylabel \"score\"\n";
    s += "plot ";
    for (std::size_t i = 0; i < plan.datasets.size(); ++i) {
      if (i > 0) s += ", \\\n     ";
      s += file + " using 1:" + std::to_string(5 + i) + " with linespoints title \"" + plan.datasets[i] + "\"";
    }
    s += "\n";
  }
  return plot;
}

}  // namespace nat::eval
