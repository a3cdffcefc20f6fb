#include "nat/cli/app.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nat/agent/backend.hpp"
#include "nat/agent/episode.hpp"
#include "nat/cli/cache.hpp"
#include "nat/cli/config.hpp"
#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"
#include "nat/eval/eval.hpp"
#include "nat/labeling/labeling.hpp"
#include "nat/reformat/reformat.hpp"
#include "nat/tools/search.hpp"
#include "nat/tools/toolset.hpp"

#ifndef NAT_VERSION
#define NAT_VERSION "dev"
#endif

namespace nat::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string render_manifest(const std::string& command, const std::string& config_ini,
                            const std::vector<std::string>& args, const std::vector<fs::path>& inputs,
                            const std::vector<fs::path>& outputs) {
  auto files = [](const std::vector<fs::path>& paths) {
    ojson arr = ojson::array();
    for (const auto& p : paths) {
      ojson e;
      e["path"] = p.string();
      e["sha256"] = strings::sha256_hex(read_file(p));
      arr.push_back(std::move(e));
    }
    return arr;
  };
  ojson j;
  j["command"] = command;
  j["version"] = NAT_VERSION;
  j["prompt_version"] = std::string(agent::kPromptVersion);
  j["args"] = args;
  j["config"] = config_ini;
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j.dump(2) + "\n";
}

void write_manifest(const fs::path& output, const std::string& manifest) {
  write_file_atomic(fs::path(output.string() + ".manifest.json"), manifest);
}

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string cache_dir;
  bool no_cache = false;
};

struct BackendOptions {
  std::string kind = "auto";
  std::string script;
  std::string endpoint;
  std::string model;
};

void add_backend_options(CLI::App* cmd, BackendOptions& b) {
  cmd->add_option("--backend", b.kind, "mock, http, or auto (mock when --script is given)")
      ->check(CLI::IsMember({"auto", "mock", "http"}));
  cmd->add_option("--script", b.script, "Mock backend script (JSON)");
  cmd->add_option("--endpoint", b.endpoint, "Chat-completions URL (overrides backend.endpoint_url)");
  cmd->add_option("--model", b.model, "Model id (overrides backend.model_id)");
}

class Session {
public:
  Session(const GlobalOptions& global, std::ostream& err) : global_(global), err_(err) {}

  const RunConfig& config() {
    if (!config_) {
      config_ = global_.config_path.empty() ? RunConfig{} : load_config(global_.config_path);
      if (!global_.cache_dir.empty()) config_->paths.cache_dir = global_.cache_dir;
      validate(*config_);
      err_ << "# effective configuration\n" << to_ini(*config_);
    }
    return *config_;
  }

  std::shared_ptr<agent::ChatBackend> backend(const BackendOptions& b) {
    const auto& c = config();
    std::shared_ptr<agent::ChatBackend> inner;
    const bool mock = b.kind == "mock" || (b.kind == "auto" && !b.script.empty());
    if (mock) {
      if (b.script.empty()) throw ConfigError("--backend mock needs --script");
      inner = std::make_shared<agent::MockBackend>(agent::MockBackend::from_file(b.script));
    } else {
      agent::HttpBackendConfig hc;
      hc.endpoint_url = b.endpoint.empty() ? c.backend.endpoint_url : b.endpoint;
      hc.model_id = b.model.empty() ? c.backend.model_id : b.model;
      if (hc.endpoint_url.empty()) throw ConfigError("no backend endpoint: set backend.endpoint_url or --endpoint");
      if (hc.model_id.empty()) throw ConfigError("no model id: set backend.model_id or --model");
      if (const char* key = std::getenv(c.backend.api_key_env.c_str())) hc.api_key = key;
      hc.logprobs_url = c.backend.logprobs_url;
      hc.retry.attempts = c.backend.retries;
      inner = std::make_shared<agent::HttpChatBackend>(hc, transport());
    }
    if (global_.no_cache) return inner;
    if (!cache_) cache_ = std::make_shared<ResponseCache>(c.paths.cache_dir);
    return std::make_shared<CachedBackend>(inner, cache_);
  }

  agent::ToolRegistry tools(const std::vector<Question>& questions) {
    const auto& c = config();
    agent::ToolRegistry registry;
    registry.set(TaskKind::math, tools::calculator_toolset());
    bool needs_search = false;
    for (const auto& q : questions) needs_search = needs_search || q.task != TaskKind::math;
    if (!needs_search) return registry;

    std::shared_ptr<tools::SearchClient> client;
    if (!c.tools.search_fixtures.empty()) {
      client = std::make_shared<tools::FixtureSearchClient>(c.tools.search_fixtures);
    } else {
      const char* key = std::getenv("SERPER_API_KEY");
      if (key == nullptr) throw ConfigError("search needs SERPER_API_KEY or tools.search_fixtures");
      net::RetryPolicy retry;
      retry.attempts = c.backend.retries;
      client = std::make_shared<tools::SerperSearchClient>(c.tools.search_endpoint, key, transport(), retry);
    }
    std::shared_ptr<tools::Reranker> reranker;
    if (c.tools.reranker == RerankerKind::remote) {
      const char* key = std::getenv(c.backend.api_key_env.c_str());
      auto embedder = std::make_shared<tools::HttpEmbedder>(c.tools.embedding_endpoint, c.tools.embedding_model,
                                                            key ? key : "", transport());
      reranker = std::make_shared<tools::EmbeddingReranker>(embedder);
    } else {
      reranker = std::make_shared<tools::LexicalReranker>();
    }
    auto set = tools::search_toolset(client, reranker, static_cast<std::size_t>(c.tools.top_k));
    registry.set(TaskKind::multihop_qa, set);
    registry.set(TaskKind::strategy_qa, set);
    return registry;
  }

  agent::EpisodeConfig episode(std::optional<std::string> mode) {
    const auto& c = config();
    auto m = mode ? agent::parse_episode_mode(*mode) : c.episode.mode;
    agent::EpisodeConfig e = m == agent::EpisodeMode::cot ? agent::cot_config() : agent::EpisodeConfig{};
    e.max_turns = c.episode.max_turns;
    e.max_tokens = c.backend.max_tokens;
    return e;
  }

  std::string config_ini() { return to_ini(config()); }

private:
  std::shared_ptr<net::HttpTransport> transport() {
    if (!transport_) transport_ = std::make_shared<net::HttplibTransport>();
    return transport_;
  }

  const GlobalOptions& global_;
  std::ostream& err_;
  std::optional<RunConfig> config_;
  std::shared_ptr<ResponseCache> cache_;
  std::shared_ptr<net::HttpTransport> transport_;
};

std::string serialize(std::span<const Trajectory> ts) {
  std::ostringstream out;
  write_unlabeled(ts, out);
  return out.str();
}

std::string serialize(std::span<const LabeledTrajectory> ts) {
  std::ostringstream out;
  write_trajectories(ts, out);
  return out.str();
}

std::vector<LabeledTrajectory> load_many(const std::vector<std::string>& paths) {
  std::vector<LabeledTrajectory> all;
  for (const auto& p : paths) {
    auto part = load_trajectories(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::string print_strategies() {
  std::string out;
  for (const auto& s : reformat::builtin_strategies()) {
    out += s.name + "  placement=" + std::string(to_string(s.placement)) +
           "  negatives=" + (s.uses_negatives ? "yes" : "no");
    if (!s.buckets.boundaries().empty()) {
      std::vector<std::string> b;
      for (double x : s.buckets.boundaries()) b.push_back(eval::format_number(x));
      out += "  buckets=[" + strings::join(b, ",") + "]";
    }
    out += "\n";
    if (s.class_prompts.empty()) out += "  (no prompt)\n";
    for (const auto& [cls, prompt] : s.class_prompts) out += "  " + labeling::class_name(cls) + ": " + prompt + "\n";
  }
  return out;
}

std::string substitute_point(std::string text, const eval::SweepRow& row) {
  auto replace = [&](const std::string& key, std::size_t value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key)) text.replace(pos, key.size(), std::to_string(value));
  };
  replace("{n_pos}", row.n_pos);
  replace("{n_neg}", row.n_neg);
  return text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory collection, labeling, dataset building and evaluation for tool-using agents", "nat"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", NAT_VERSION);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--cache-dir", global.cache_dir, "Response cache directory (overrides paths.cache_dir)");
  app.add_flag("--no-cache", global.no_cache, "Bypass the response cache");

  // collect
  auto* collect = app.add_subcommand("collect", "Run the agent on questions and write trajectory JSONL");
  BackendOptions collect_backend;
  std::string collect_questions, collect_out, collect_temps;
  std::optional<std::string> collect_mode;
  unsigned collect_workers = 0;
  add_backend_options(collect, collect_backend);
  collect->add_option("--questions", collect_questions, "Question JSONL")->required();
  collect->add_option("--out", collect_out, "Output trajectory JSONL")->required();
  collect->add_option("--temperatures", collect_temps, "Comma-separated sampling temperatures");
  collect->add_option("--mode", collect_mode, "react or cot");
  collect->add_option("--workers", collect_workers, "Concurrent episodes");

  // label
  auto* label = app.add_subcommand("label", "Label trajectories against gold answers");
  std::string label_trajectories, label_questions, label_out;
  label->add_option("--trajectories", label_trajectories, "Trajectory JSONL from collect")->required();
  label->add_option("--questions", label_questions, "Question JSONL")->required();
  label->add_option("--out", label_out, "Labeled trajectory JSONL")->required();

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Sample labeled pools into a fine-tuning dataset");
  std::vector<std::string> build_labeled;
  std::string build_strategy, build_out;
  std::optional<std::size_t> build_pos, build_neg;
  std::optional<std::uint64_t> build_seed;
  build->add_option("--labeled", build_labeled, "Labeled trajectory JSONL (repeatable)")->required();
  build->add_option("--strategy", build_strategy, "Prompting strategy (see `strategies`)");
  build->add_option("--n-pos", build_pos, "Positive samples (default: all)");
  build->add_option("--n-neg", build_neg, "Negative samples (default: all, or 0 for vanilla)");
  build->add_option("--seed", build_seed, "Sampling seed");
  build->add_option("--out", build_out, "Dataset JSONL")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate an agent on a test set");
  BackendOptions eval_backend;
  std::string eval_questions, eval_strategy, eval_dataset, eval_format = "table", eval_out, eval_audit;
  std::optional<int> eval_runs;
  std::optional<double> eval_temperature;
  std::optional<std::string> eval_mode;
  unsigned eval_workers = 0;
  add_backend_options(evaluate, eval_backend);
  evaluate->add_option("--questions", eval_questions, "Test question JSONL")->required();
  evaluate->add_option("--strategy", eval_strategy, "Strategy whose inference prompt is used");
  evaluate->add_option("--dataset", eval_dataset, "Dataset name in the report (default: file stem)");
  evaluate->add_option("--runs", eval_runs, "Number of runs");
  evaluate->add_option("--temperature", eval_temperature, "Decoding temperature");
  evaluate->add_option("--mode", eval_mode, "react or cot");
  evaluate->add_option("--workers", eval_workers, "Concurrent questions");
  evaluate->add_option("--format", eval_format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
  evaluate->add_option("--out", eval_out, "Report file (default: stdout)");
  evaluate->add_option("--audit-dir", eval_audit, "Directory for per-run trajectories");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Build datasets over a grid of sample counts");
  std::vector<std::string> sweep_labeled, sweep_eval;
  std::string sweep_strategy, sweep_vary = "n_neg", sweep_values, sweep_emit, sweep_out, sweep_endpoint_template,
                              sweep_script_template;
  std::size_t sweep_fixed = 0;
  std::optional<std::uint64_t> sweep_seed;
  bool sweep_plot = false;
  sweep->add_option("--labeled", sweep_labeled, "Labeled trajectory JSONL (repeatable)")->required();
  sweep->add_option("--strategy", sweep_strategy, "Prompting strategy");
  sweep->add_option("--vary", sweep_vary, "Varying axis: n_pos or n_neg");
  sweep->add_option("--fixed", sweep_fixed, "Value of the fixed axis")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values of the varying axis");
  sweep->add_option("--seed", sweep_seed, "Sampling seed");
  sweep->add_option("--emit-dir", sweep_emit, "Directory for per-point datasets")->required();
  sweep->add_option("--out", sweep_out, "CSV output")->required();
  sweep->add_flag("--plot", sweep_plot, "Also write <out>.dat and <out>.gp for gnuplot");
  sweep->add_option("--eval", sweep_eval, "NAME=QUESTIONS.jsonl evaluated at every point (repeatable)");
  sweep->add_option("--endpoint-template", sweep_endpoint_template,
                    "Per-point chat endpoint; {n_pos} and {n_neg} are substituted");
  sweep->add_option("--script-template", sweep_script_template, "Per-point mock script path with {n_pos}/{n_neg}");

  // perplexity
  auto* ppl = app.add_subcommand("perplexity", "Assistant-span perplexity of positive trajectories");
  BackendOptions ppl_backend;
  std::string ppl_dev, ppl_out;
  add_backend_options(ppl, ppl_backend);
  ppl->add_option("--dev", ppl_dev, "Labeled positive trajectory JSONL")->required();
  ppl->add_option("--out", ppl_out, "Write the result here as well");

  auto* strategies = app.add_subcommand("strategies", "List built-in strategies with their exact prompts");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }

  Session session(global, err);
  try {
    if (*strategies) {
      out << print_strategies();
      return kExitOk;
    }

    if (*collect) {
      auto questions = load_questions(collect_questions);
      agent::CollectOptions options;
      options.temperatures =
          collect_temps.empty() ? session.config().episode.temperatures : parse_number_list(collect_temps);
      options.episode = session.episode(collect_mode);
      options.workers = collect_workers ? collect_workers : session.config().episode.workers;
      auto backend = session.backend(collect_backend);
      auto registry = session.tools(questions);
      auto trajectories = agent::collect(questions, *backend, registry, options);
      write_file_atomic(collect_out, serialize(trajectories));
      std::vector<fs::path> inputs{collect_questions};
      if (!collect_backend.script.empty()) inputs.emplace_back(collect_backend.script);
      write_manifest(collect_out, render_manifest("collect", session.config_ini(), args, inputs, {collect_out}));
      err << "collected " << trajectories.size() << " trajectories\n";
      return kExitOk;
    }

    if (*label) {
      auto trajectories = load_unlabeled(label_trajectories);
      auto questions = load_questions(label_questions);
      auto labeled = labeling::label_all(trajectories, questions);
      write_file_atomic(label_out, serialize(labeled));
      write_manifest(label_out, render_manifest("label", session.config_ini(), args,
                                                {label_trajectories, label_questions}, {label_out}));
      std::size_t pos = 0;
      for (const auto& lt : labeled) pos += lt.positive() ? 1 : 0;
      err << "labeled " << labeled.size() << ": " << pos << " positive, " << labeled.size() - pos << " negative\n";
      return kExitOk;
    }

    if (*build) {
      auto strategy = reformat::find_strategy(build_strategy.empty() ? session.config().strategy : build_strategy);
      auto pools = reformat::prepare_pools(load_many(build_labeled));
      const std::size_t n_pos = build_pos.value_or(pools.positives.size());
      const std::size_t n_neg = build_neg.value_or(strategy.uses_negatives ? pools.negatives.size() : 0);
      auto records = reformat::build_mixture(pools.positives, pools.negatives, n_pos, n_neg, strategy,
                                             build_seed.value_or(session.config().seed));
      std::ostringstream data;
      reformat::emit_dataset(records, data);
      write_file_atomic(build_out, data.str());
      write_manifest(build_out,
                     render_manifest("build-dataset", session.config_ini(), args, as_paths(build_labeled), {build_out}));
      err << "wrote " << records.size() << " records (" << n_pos << " positive, " << n_neg << " negative)\n";
      return kExitOk;
    }

    if (*evaluate) {
      auto questions = load_questions(eval_questions);
      if (questions.empty()) throw ValidationError("testset: no questions");
      const TaskKind task = questions.front().task;
      auto strategy = reformat::find_strategy(eval_strategy.empty() ? session.config().strategy : eval_strategy);
      auto config = session.episode(eval_mode);
      config.temperature = eval_temperature.value_or(eval::default_eval_temperature(task));
      eval::EvalOptions options;
      options.dataset = eval_dataset.empty() ? fs::path(eval_questions).stem().string() : eval_dataset;
      options.workers = eval_workers ? eval_workers : session.config().episode.workers;
      if (!eval_audit.empty()) options.audit_dir = eval_audit;
      auto backend = session.backend(eval_backend);
      auto registry = session.tools(questions);
      auto report = eval::evaluate(*backend, questions, strategy, config, eval_runs.value_or(eval::default_eval_runs(task)),
                                   registry, options);
      std::vector<eval::EvalReport> reports{report};
      auto text = eval::render_report(reports, eval::parse_report_format(eval_format));
      if (eval_out.empty()) {
        out << text;
      } else {
        write_file_atomic(eval_out, text);
        write_manifest(eval_out, render_manifest("evaluate", session.config_ini(), args, {eval_questions}, {eval_out}));
      }
      return kExitOk;
    }

    if (*sweep) {
      eval::SweepPlan plan;
      plan.varying = eval::parse_sweep_axis(sweep_vary);
      plan.fixed = sweep_fixed;
      for (double v : sweep_values.empty() ? std::vector<double>{} : parse_number_list(sweep_values)) {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
          throw ConfigError("--values must be non-negative integers");
        plan.values.push_back(static_cast<std::size_t>(v));
      }
      plan.strategy = sweep_strategy.empty() ? session.config().strategy : sweep_strategy;
      plan.seed = sweep_seed.value_or(session.config().seed);

      std::vector<std::pair<std::string, std::vector<Question>>> testsets;
      for (const auto& e : sweep_eval) {
        auto eq = e.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--eval expects NAME=QUESTIONS.jsonl");
        testsets.emplace_back(e.substr(0, eq), load_questions(e.substr(eq + 1)));
        plan.datasets.push_back(e.substr(0, eq));
      }
      eval::PointEvaluator evaluator;
      if (!testsets.empty() && (!sweep_endpoint_template.empty() || !sweep_script_template.empty())) {
        evaluator = [&](const eval::SweepRow& row) {
          BackendOptions b;
          if (!sweep_script_template.empty()) {
            b.kind = "mock";
            b.script = substitute_point(sweep_script_template, row);
          } else {
            b.kind = "http";
            b.endpoint = substitute_point(sweep_endpoint_template, row);
          }
          auto backend = session.backend(b);
          std::map<std::string, double> metrics;
          for (const auto& [name, questions] : testsets) {
            const TaskKind task = questions.front().task;
            auto config = session.episode(std::nullopt);
            config.temperature = eval::default_eval_temperature(task);
            eval::EvalOptions options;
            options.dataset = name;
            auto report = eval::evaluate(*backend, questions, reformat::find_strategy(plan.strategy), config,
                                         eval::default_eval_runs(task), session.tools(questions), options);
            const auto* s = report.find(name, task == TaskKind::multihop_qa ? eval::kF1 : eval::kAccuracy);
            metrics[name] = s->mean();
          }
          return metrics;
        };
      }

      auto pools = reformat::prepare_pools(load_many(sweep_labeled));
      auto result = eval::run_sweep(plan, pools, sweep_emit, evaluator);
      write_file_atomic(sweep_out, eval::sweep_csv(result));
      std::vector<fs::path> outputs{sweep_out};
      if (sweep_plot) {
        const fs::path data = sweep_out + ".dat";
        const fs::path script = sweep_out + ".gp";
        auto plot = eval::render_plot_script(result, data.filename().string());
        write_file_atomic(data, plot.data);
        write_file_atomic(script, plot.script);
        outputs.push_back(data);
        outputs.push_back(script);
      }
      for (const auto& row : result.rows) {
        if (row.ok()) outputs.push_back(row.dataset_file);
      }
      write_manifest(sweep_out, render_manifest("sweep", session.config_ini(), args, as_paths(sweep_labeled), outputs));
      std::size_t failed = 0;
      for (const auto& row : result.rows) failed += row.ok() ? 0 : 1;
      err << "sweep: " << result.rows.size() << " points, " << failed << " not built\n";
      return kExitOk;
    }

    if (*ppl) {
      auto dev = load_trajectories(ppl_dev);
      auto backend = session.backend(ppl_backend);
      auto result = eval::perplexity(*backend, dev);
      const std::string text = eval::format_number(result.perplexity) + "\n";
      out << text;
      err << "tokens " << result.token_count << ", log-prob sum " << eval::format_number(result.logprob_sum) << "\n";
      if (!ppl_out.empty()) {
        write_file_atomic(ppl_out, text);
        write_manifest(ppl_out, render_manifest("perplexity", session.config_ini(), args, {ppl_dev}, {ppl_out}));
      }
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace nat::cli
