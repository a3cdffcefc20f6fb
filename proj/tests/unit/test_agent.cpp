#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include "../support/helpers.hpp"
#include "nat/agent/backend.hpp"
#include "nat/agent/episode.hpp"
#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/tools/toolset.hpp"

using namespace nat;
using namespace nat::agent;

namespace {

Question math_q(const std::string& id, const std::string& answer = "5") {
  return Question{id, "What is 2+3?", NumericGold{answer}, TaskKind::math};
}

MockBackend scripted(const std::vector<std::string>& turns) {
  MockBackend::Script s;
  s.fallback = turns;
  return MockBackend(std::move(s));
}

// Returns a fixed string for every call, counting them.
class ConstantBackend final : public ChatBackend {
public:
  explicit ConstantBackend(std::string text) : text_(std::move(text)) {}
  [[nodiscard]] std::string id() const override { return "const"; }
  [[nodiscard]] std::string model_id() const override { return "const"; }
  std::string complete(const CompletionRequest&) override {
    ++calls;
    return text_;
  }
  std::atomic<int> calls{0};

private:
  std::string text_;
};

}  // namespace

TEST_SUITE("agent") {
  TEST_CASE("tool call then finish") {
    auto backend = scripted({"Thought: add.\nAction: calculator[2+3]", "Thought: done.\nAction: finish[5]"});
    auto tools = tools::calculator_toolset();
    auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
    CHECK(t.outcome == Outcome::finished("5"));
    CHECK(t.assistant_turns == 2);
    CHECK(t.tool_call_errors == 0);
    REQUIRE(t.messages.size() == 5);
    CHECK(t.messages[0].role == Role::system);
    CHECK(t.messages[1] == Message{Role::user, "What is 2+3?"});
    CHECK(t.messages[3] == Message{Role::tool, "Observation: 5"});
    CHECK_NOTHROW(validate(t));
  }

  TEST_CASE("turn limit") {
    ConstantBackend backend("Thought: again.\nAction: calculator[1+1]");
    auto tools = tools::calculator_toolset();
    EpisodeConfig cfg;
    cfg.max_turns = 3;
    auto t = run_episode(math_q("a"), backend, &tools, cfg);
    CHECK(t.outcome.kind == OutcomeKind::turn_limit_exceeded);
    CHECK(t.assistant_turns == 3);
    CHECK(backend.calls == 3);
    CHECK_NOTHROW(validate(t));
  }

  TEST_CASE("two consecutive unparseable steps end the episode") {
    auto backend = scripted({"hmm", "still thinking", "Action: finish[5]"});
    auto tools = tools::calculator_toolset();
    auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
    CHECK(t.outcome.kind == OutcomeKind::parse_failure);
    CHECK(t.assistant_turns == 2);
    CHECK(t.tool_call_errors == 2);
    CHECK(t.messages[3].content == "Observation: " + std::string(kUnparseableFeedback));
    CHECK_NOTHROW(validate(t));
  }

  TEST_CASE("an unparseable step followed by a valid one recovers") {
    auto backend = scripted({"hmm", "Action: calculator[2+3]", "oops", "Action: finish[5]"});
    auto tools = tools::calculator_toolset();
    auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
    CHECK(t.outcome == Outcome::finished("5"));
    CHECK(t.tool_call_errors == 2);
  }

  TEST_CASE("tool errors are fed back and counted") {
    auto backend = scripted({"Action: calculator[1/0]", "Action: wiki[x]", "Action: finish[5]"});
    auto tools = tools::calculator_toolset();
    auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
    CHECK(t.outcome.is_finished());
    CHECK(t.tool_call_errors == 2);
    CHECK(t.messages[3].content == "Observation: Error: division by zero");
    CHECK(t.messages[5].content == "Observation: Error: unknown tool 'wiki'; available: calculator");
  }

  TEST_CASE("backend failures abort the episode") {
    auto tools = tools::calculator_toolset();
    SUBCASE("script exhausted") {
      auto backend = scripted({"Action: calculator[1+1]"});
      auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
      CHECK(t.outcome.kind == OutcomeKind::tool_failure_abort);
      CHECK(t.assistant_turns == 1);
      CHECK_NOTHROW(validate(t));
    }
    SUBCASE("empty completion") {
      ConstantBackend backend("  \n");
      auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
      CHECK(t.outcome.kind == OutcomeKind::tool_failure_abort);
      CHECK(t.assistant_turns == 0);
    }
  }

  TEST_CASE("completions are cut at the stop sequence") {
    ConstantBackend backend("Thought: x\nAction: finish[5]\nObservation: invented");
    auto tools = tools::calculator_toolset();
    auto t = run_episode(math_q("a"), backend, &tools, EpisodeConfig{});
    CHECK(t.messages.back().content == "Thought: x\nAction: finish[5]");
    CHECK(t.outcome == Outcome::finished("5"));
  }

  TEST_CASE("query prompt is attached to the user turn") {
    ConstantBackend backend("Action: finish[5]");
    auto tools = tools::calculator_toolset();
    EpisodeConfig cfg;
    cfg.query_prompt = QueryPrompt{Placement::suffix, "Please answer correctly."};
    auto t = run_episode(math_q("a"), backend, &tools, cfg);
    CHECK(t.messages[1].content == "What is 2+3?\nPlease answer correctly.");
  }

  TEST_CASE("chain-of-thought mode takes one completion") {
    auto cfg = cot_config();
    CHECK(cfg.mode == EpisodeMode::cot);
    CHECK(builtin_cot_examples().size() == 6);
    SUBCASE("marked answer") {
      ConstantBackend backend("2 plus 3 is 5. The answer is 5.");
      auto t = run_episode(math_q("a"), backend, nullptr, cfg);
      CHECK(t.outcome == Outcome::finished("5"));
      CHECK(t.assistant_turns == 1);
      CHECK(backend.calls == 1);
      CHECK_NOTHROW(validate(t));
    }
    SUBCASE("no marker") {
      ConstantBackend backend("I think it is five");
      auto t = run_episode(math_q("a"), backend, nullptr, cfg);
      CHECK(t.outcome.kind == OutcomeKind::parse_failure);
    }
  }

  TEST_CASE("react mode requires tools") {
    ConstantBackend backend("Action: finish[5]");
    CHECK_THROWS_AS(run_episode(math_q("a"), backend, nullptr, EpisodeConfig{}), ConfigError);
  }

  TEST_CASE("episode config validation") {
    EpisodeConfig cfg;
    cfg.max_turns = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    EpisodeConfig icl;
    icl.icl_examples = {{Role::user, "q"}, {Role::assistant, "a"}};
    CHECK_THROWS_AS(validate(icl), ConfigError);  // demonstrations are for chain-of-thought only
  }

  TEST_CASE("collect orders question-major with the temperature slot as sample_index") {
    auto questions = load_questions(nat::testing::fixture("math7.jsonl"));
    auto backend = MockBackend::from_file(nat::testing::fixture("s1.json"));
    ToolRegistry registry;
    registry.set(TaskKind::math, tools::calculator_toolset());
    CollectOptions opts;
    opts.workers = 4;
    auto out = collect(questions, backend, registry, opts);
    REQUIRE(out.size() == 21);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].question_id == questions[i / 3].id);
      CHECK(out[i].sample_index == static_cast<int>(i % 3));
      CHECK(out[i].temperature == kDefaultTemperatures[i % 3]);
      CHECK(out[i].model_id == "mock-math-7");
      CHECK_NOTHROW(validate(out[i]));
    }
    CHECK(out[7].outcome.kind == OutcomeKind::parse_failure);        // q03#1
    CHECK(out[12].outcome.kind == OutcomeKind::turn_limit_exceeded);  // q05#0
    CHECK(out[4].tool_call_errors == 1);                              // q02#1
    CHECK(out[15].tool_call_errors == 1);                             // q06#0
  }

  TEST_CASE("collect output is independent of worker count") {
    auto questions = load_questions(nat::testing::fixture("math7.jsonl"));
    auto backend = MockBackend::from_file(nat::testing::fixture("s1.json"));
    ToolRegistry registry;
    registry.set(TaskKind::math, tools::calculator_toolset());
    CollectOptions one;
    CollectOptions many;
    many.workers = 8;
    std::ostringstream a;
    std::ostringstream b;
    write_unlabeled(collect(questions, backend, registry, one), a);
    write_unlabeled(collect(questions, backend, registry, many), b);
    CHECK(a.str() == b.str());
  }

  TEST_CASE("mock script precedence and identity") {
    auto backend = MockBackend::from_json(
        R"({"episodes":{"q":["episode"]},"samples":{"q#1":["sample"]},"default":["fallback"]})");
    CompletionRequest r;
    r.question_id = "q";
    CHECK(backend.complete(r) == "episode");
    r.sample_index = 1;
    CHECK(backend.complete(r) == "sample");
    r.question_id = "other";
    CHECK(backend.complete(r) == "fallback");
    r.turn_index = 1;
    CHECK_THROWS_AS(backend.complete(r), TransportError);

    auto same = MockBackend::from_json(
        R"({"episodes":{"q":["episode"]},"samples":{"q#1":["sample"]},"default":["fallback"]})");
    auto different = MockBackend::from_json(R"({"episodes":{"q":["other"]}})");
    CHECK(backend.id() == same.id());
    CHECK(backend.id() != different.id());
  }

  TEST_CASE("mock log-probabilities are per whitespace token") {
    auto backend = MockBackend::from_json(R"({"default":[],"token_prob":0.5,"token_probs":{"b":0.25}})");
    REQUIRE(backend.supports_logprobs());
    auto lps = backend.token_logprobs({}, "a b  c");
    REQUIRE(lps.size() == 3);
    CHECK(lps[0] == std::log(0.5));
    CHECK(lps[1] == std::log(0.25));
    auto plain = scripted({});
    CHECK_THROWS_AS(plain.token_logprobs({}, "a"), CapabilityError);
  }

  TEST_CASE("episode mode names") {
    CHECK(parse_episode_mode("react") == EpisodeMode::react);
    CHECK(parse_episode_mode("cot") == EpisodeMode::cot);
    CHECK_THROWS_AS(parse_episode_mode("plan"), ConfigError);
  }
}
