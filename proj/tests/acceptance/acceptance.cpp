// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "../support/calc_oracle.hpp"
#include "../support/helpers.hpp"
#include "nat/cli/app.hpp"
#include "nat/cli/cache.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"
#include "nat/eval/eval.hpp"
#include "nat/labeling/labeling.hpp"
#include "nat/reformat/reformat.hpp"
#include "nat/tools/calculator.hpp"

namespace fs = std::filesystem;
using namespace nat;
using nat::testing::fixture;

namespace {

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult nat_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void nat_ok(const std::vector<std::string>& args) {
  auto r = nat_cli(args);
  if (r.code != 0) throw Failure{"nat " + args.front() + " exited " + std::to_string(r.code) + ": " + r.err};
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::pair<int, int> label_counts(const fs::path& labeled) {
  int pos = 0;
  int neg = 0;
  for (const auto& lt : load_trajectories(labeled)) (lt.label == Label::positive ? pos : neg)++;
  return {pos, neg};
}

// collect -> label -> build-dataset into `dir`.
void pipeline(const fs::path& dir, const std::string& questions, const std::string& script, const std::string& strategy,
              const std::vector<std::string>& globals) {
  std::vector<std::string> g = globals;
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), g.begin(), g.end());
    return args;
  };
  nat_ok(with({"collect", "--questions", questions, "--script", script, "--out", (dir / "trajectories.jsonl").string(),
               "--workers", "4"}));
  nat_ok(with({"label", "--trajectories", (dir / "trajectories.jsonl").string(), "--questions", questions, "--out",
               (dir / "labeled.jsonl").string()}));
  nat_ok(with({"build-dataset", "--labeled", (dir / "labeled.jsonl").string(), "--strategy", strategy, "--seed", "0",
               "--out", (dir / "dataset.jsonl").string()}));
}

// ---- criteria --------------------------------------------------------------

void calculator_oracle() {
  const auto start = std::chrono::steady_clock::now();
  nat::testing::ExprGenerator gen(20240601);
  nat::testing::GmpOracle oracle;
  for (int i = 0; i < 1000; ++i) {
    auto tree = gen.generate();
    const auto text = gen.print(*tree);
    auto expected = oracle.run(*tree);
    auto got = tools::calc_eval(text);
    if (const auto* value = std::get_if<std::string>(&expected)) {
      expect(got.is_ok() && got.text() == *value, text + ": got '" + got.text() + "', oracle '" + *value + "'");
    } else {
      const auto& msg = std::get<nat::testing::OracleError>(expected).message;
      expect(!got.is_ok() && got.text() == msg, text + ": got '" + got.text() + "', oracle error '" + msg + "'");
    }
  }
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(secs < 5.0, "took " + std::to_string(secs) + " s");
}

void metric_fixtures() {
  std::ifstream in(fixture("em_f1_cases.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    const std::string pred = j["pred"];
    const std::string gold = j["gold"];
    expect(labeling::exact_match(pred, gold) == j["em"].get<int>(), "EM for '" + pred + "' vs '" + gold + "'");
    expect(std::abs(labeling::token_f1(pred, gold) - j["f1"].get<double>()) < 1e-12,
           "F1 for '" + pred + "' vs '" + gold + "'");
    ++n;
  }
  expect(n == 25, "expected 25 cases, read " + std::to_string(n));
}

void prompt_strings() {
  auto r = nat_cli({"strategies"});
  expect(r.code == 0, "strategies exited " + std::to_string(r.code));
  expect(r.out.find("Please generate a solution that **correctly** answers the question.") != std::string::npos,
         "correctly prompt missing");
  expect(r.out.find("Please generate a solution that **incorrectly** answers the question.") != std::string::npos,
         "incorrectly prompt missing");
}

void label_blind_inference() {
  auto pool = load_trajectories(fixture("mixed50.jsonl"));
  expect(pool.size() == 50, "fixture size");
  std::set<Label> labels;
  for (const auto& lt : pool) labels.insert(lt.label);
  expect(labels.size() == 2, "fixture must mix labels");
  auto nat = reformat::find_strategy("nat");
  const std::string negative_prompt = nat.prompt_for(0);
  std::set<std::string> appended;
  for (const auto& lt : pool) {
    auto rec = reformat::apply_strategy(lt, nat, reformat::PromptRole::inference);
    expect(rec.has_value(), "record dropped");
    std::string original;
    std::string formatted;
    for (const auto& m : lt.trajectory.messages)
      if (m.role == Role::user) {
        original = m.content;
        break;
      }
    for (const auto& m : rec->messages)
      if (m.role == Role::user) {
        formatted = m.content;
        break;
      }
    expect(formatted.starts_with(original), "user text rewritten");
    const auto tail = formatted.substr(original.size());
    expect(tail.find(negative_prompt) == std::string::npos, "negative-class prompt in " + lt.trajectory.source_id());
    appended.insert(tail);
  }
  expect(appended.size() == 1, std::to_string(appended.size()) + " distinct appended strings");
}

void nat2_buckets() {
  auto nat2 = reformat::find_strategy("nat2");
  expect(nat2.buckets.boundaries() == std::vector<double>{0.4}, "nat2 boundaries");
  const std::vector<std::pair<double, labeling::ClassId>> cases{
      {0.0, 0}, {0.1, 0}, {0.39, 0}, {0.4, 1}, {0.99, 1}, {1.0, labeling::kPositiveClass}};
  for (auto [q, cls] : cases) {
    auto got = labeling::bucket_quality(q, nat2.buckets);
    expect(got == cls, "quality " + std::to_string(q) + " -> " + labeling::class_name(got));
  }
}

void end_to_end_determinism(const fs::path& work) {
  const auto questions = fixture("math7.jsonl").string();
  const auto script = fixture("s1.json").string();
  const fs::path a = work / "e2e_a";
  const fs::path b = work / "e2e_b";
  fs::create_directories(a);
  fs::create_directories(b);
  pipeline(a, questions, script, "nat", {"--no-cache"});
  pipeline(b, questions, script, "nat", {"--no-cache"});
  for (const char* name : {"trajectories.jsonl", "labeled.jsonl", "dataset.jsonl"}) {
    expect(read_file(a / name) == read_file(b / name), std::string(name) + " differs between runs");
  }
  expect(count_lines(read_file(a / "trajectories.jsonl")) == 21, "expected 21 trajectories");

  const fs::path c = work / "e2e_60";
  fs::create_directories(c);
  pipeline(c, fixture("math5.jsonl").string(), fixture("s60.json").string(), "nat", {"--no-cache"});
  expect(count_lines(read_file(c / "trajectories.jsonl")) == 15, "expected 15 trajectories");
  auto [pos, neg] = label_counts(c / "labeled.jsonl");
  expect(pos == 9 && neg == 6, "60% script gave " + std::to_string(pos) + "/" + std::to_string(neg));

  // One dataset per strategy, for the loss-mask scan.
  for (const auto& s : reformat::builtin_strategies()) {
    nat_ok({"build-dataset", "--labeled", (a / "labeled.jsonl").string(), "--strategy", s.name, "--seed", "0", "--out",
            (a / ("dataset_" + s.name + ".jsonl")).string(), "--no-cache"});
  }
}

void behaviour_metrics() {
  // 1000 tool attempts (100 trajectories x 10 calls), 79 failures.
  std::vector<Trajectory> ts;
  int remaining = 79;
  for (int i = 0; i < 100; ++i) {
    int errors = std::min(remaining, 7);
    remaining -= errors;
    ts.push_back(nat::testing::make_trajectory("a" + std::to_string(i), 0, true, "1", 10, errors));
  }
  expect(remaining == 0, "fixture construction");
  const double rate = labeling::action_error_rate(ts);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", rate);
  expect(std::string(buf) == "7.90" && std::abs(rate - 7.9) < 1e-12, std::string("action error rate ") + buf);

  std::mt19937_64 rng(7);
  std::vector<Trajectory> turns;
  long long total = 0;
  for (int i = 0; i < 997; ++i) {
    int calls = static_cast<int>(rng() % 8);
    bool finished = rng() % 2 == 0;
    turns.push_back(nat::testing::make_trajectory("t" + std::to_string(i), 0, finished, "1", calls));
    // brute force: count assistant messages directly
    for (const auto& m : turns.back().messages) total += m.role == Role::assistant ? 1 : 0;
  }
  const double expected = static_cast<double>(total) / static_cast<double>(turns.size());
  const double got = labeling::avg_turns(turns);
  expect(std::abs(got - expected) <= 1e-12, "avg turns " + std::to_string(got) + " vs " + std::to_string(expected));
}

void perplexity_closed_form() {
  std::vector<LabeledTrajectory> dev;
  for (int i = 0; i < 5; ++i) dev.push_back(nat::testing::make_labeled("p" + std::to_string(i), 0, true, 1.0));
  for (double p : {0.25, 0.5, 0.9}) {
    agent::MockBackend::Script s;
    s.token_prob = p;
    agent::MockBackend backend(s);
    const double ppl = eval::perplexity(backend, dev).perplexity;
    expect(std::abs(ppl - 1.0 / p) / (1.0 / p) < 1e-9, "p=" + std::to_string(p) + " gave " + std::to_string(ppl));
  }
}

std::vector<std::string> split_csv_line(std::string line) {
  if (line.ends_with('\r')) line.pop_back();
  return strings::split(line, ',');
}

void sweep_shape(const fs::path& work) {
  const std::size_t k = 1000;
  const fs::path dir = work / "sweep";
  fs::create_directories(dir);
  {
    std::vector<LabeledTrajectory> pool;
    for (std::size_t i = 0; i < 2 * k; ++i)
      pool.push_back(nat::testing::make_labeled("p" + std::to_string(i), 0, true, 1.0));
    for (std::size_t i = 0; i < 12 * k; ++i)
      pool.push_back(nat::testing::make_labeled("n" + std::to_string(i), 1, false, 0.0));
    std::ofstream out(dir / "labeled.jsonl", std::ios::binary);
    write_trajectories(pool, out);
  }
  std::vector<std::string> values;
  for (std::size_t v = 0; v <= 12 * k; v += 2 * k) values.push_back(std::to_string(v));
  nat_ok({"sweep", "--labeled", (dir / "labeled.jsonl").string(), "--strategy", "nat", "--vary", "n_neg", "--fixed",
          std::to_string(2 * k), "--values", strings::join(values, ","), "--seed", "0", "--emit-dir",
          (dir / "points").string(), "--out", (dir / "sweep.csv").string(), "--no-cache"});

  std::istringstream csv(read_file(dir / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Failure{"missing column " + name};
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_neg = col("n_neg");
  const auto c_pos = col("n_pos");
  const auto c_status = col("status");
  const auto c_records = col("records");
  const auto c_cpos = col("class_positive");
  const auto c_cneg = col("class_negative_0");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    auto f = split_csv_line(line);
    const std::size_t n_neg = 2 * k * rows;
    expect(f[c_status] == "ok", "row " + std::to_string(rows) + " status " + f[c_status]);
    expect(f[c_pos] == std::to_string(2 * k), "n_pos column");
    expect(f[c_neg] == std::to_string(n_neg), "n_neg column");
    expect(f[c_records] == std::to_string(2 * k + n_neg), "records column");
    expect(f[c_cpos] == std::to_string(2 * k), "class_positive column");
    expect(f[c_cneg] == std::to_string(n_neg), "class_negative_0 column");
    // composition recounted from the emitted file
    const auto file = dir / "points" / ("nat_pos" + std::to_string(2 * k) + "_neg" + std::to_string(n_neg) + ".jsonl");
    std::ifstream in(file);
    std::string rec;
    std::size_t pos = 0;
    std::size_t neg = 0;
    while (std::getline(in, rec)) (nlohmann::json::parse(rec)["meta"]["label"] == "positive" ? pos : neg)++;
    expect(pos == 2 * k && neg == n_neg, "emitted composition at n_neg=" + std::to_string(n_neg));
    ++rows;
  }
  expect(rows == 7, std::to_string(rows) + " rows");
}

void loss_mask_invariant(const fs::path& work) {
  std::size_t datasets = 0;
  for (const auto& entry : fs::recursive_directory_iterator(work)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    const auto name = entry.path().filename().string();
    if (!name.starts_with("dataset") && !name.starts_with("nat_pos")) continue;
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line);
      std::size_t train = 0;
      std::size_t assistant = 0;
      for (const auto& m : j["messages"]) {
        train += m["train"].get<bool>() ? 1 : 0;
        assistant += m["role"] == "assistant" ? 1 : 0;
        expect(!m["train"].get<bool>() || m["role"] == "assistant", name + ": train flag on a non-assistant message");
      }
      expect(train == assistant, name + ": train count " + std::to_string(train) + " vs assistant " +
                                     std::to_string(assistant));
    }
    ++datasets;
  }
  expect(datasets >= 10, "only " + std::to_string(datasets) + " datasets found");
}

void cache_contract(const fs::path& work) {
  const fs::path dir = work / "cache";
  cli::ResponseCache cache(dir / "store");
  std::atomic<int> fetches{0};
  const std::string canonical = R"({"k":1})";
  const auto hash = cli::ResponseCache::key_hash(canonical);
  std::vector<std::string> results(100);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 100; ++i) {
      threads.emplace_back([&, i] {
        results[i] = cache.get_or_fetch(hash, canonical, [&] {
          ++fetches;
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
          return std::string("value");
        });
      });
    }
  }
  expect(fetches == 1, std::to_string(fetches.load()) + " fetches");
  for (const auto& r : results) expect(r == "value", "wrong value returned to a waiter");

  const auto questions = fixture("math7.jsonl").string();
  const auto script = fixture("s1.json").string();
  const auto store = (dir / "responses").string();
  auto collect = [&](const std::string& name) {
    nat_ok({"collect", "--questions", questions, "--script", script, "--out", (dir / name).string(), "--workers", "4",
            "--cache-dir", store});
    return read_file(dir / name);
  };
  const auto cold = collect("cold.jsonl");
  const auto warm = collect("warm.jsonl");
  expect(cold == warm, "warm and cold outputs differ");
  expect(fs::exists(store) && !fs::is_empty(store), "cache directory was not populated");
}

}  // namespace

int main() {
  nat::testing::TempDir work;
  struct Criterion {
    const char* name;
    std::function<void()> check;
  };
  const std::vector<Criterion> criteria{
      {"calculator oracle equivalence (1000 expressions, < 5 s)", calculator_oracle},
      {"EM/F1 metric fixtures (25 cases)", metric_fixtures},
      {"prompt strings are byte-exact", prompt_strings},
      {"label-blind inference (50 mixed trajectories)", label_blind_inference},
      {"nat2 bucket boundaries", nat2_buckets},
      {"end-to-end determinism and scripted 60% counts", [&] { end_to_end_determinism(work.path()); }},
      {"action error rate 7.90 and average turns", behaviour_metrics},
      {"perplexity equals 1/p", perplexity_closed_form},
      {"sweep shape (7 rows, composition columns)", [&] { sweep_shape(work.path()); }},
      {"loss-mask invariant on every emitted dataset", [&] { loss_mask_invariant(work.path()); }},
      {"cache contract (1 fetch for 100 callers, warm equals cold)", [&] { cache_contract(work.path()); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      c.check();
      ok = true;
    } catch (const Failure& f) {
      detail = f.what;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (ok) {
      std::cout << "PASS  " << c.name << "\n";
    } else {
      ++failed;
      std::cout << "FAIL  " << c.name << ": " << detail << "\n";
    }
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
