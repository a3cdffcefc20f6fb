#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nat/core/types.hpp"

namespace nat::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(NAT_FIXTURES_DIR) / name; }
inline std::filesystem::path golden(const std::string& name) { return std::filesystem::path(NAT_GOLDEN_DIR) / name; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("nat-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

/// A valid ReAct trajectory: `tool_calls` calculator steps (the first
/// `errors` of them failing) and then a finish action when `finished`.
inline Trajectory make_trajectory(const std::string& qid, int sample_index, bool finished, const std::string& answer,
                                  int tool_calls = 1, int errors = 0, TaskKind task = TaskKind::math) {
  Trajectory t;
  t.question_id = qid;
  t.task = task;
  t.model_id = "test";
  t.temperature = 0.2 + 0.25 * sample_index;
  if (t.temperature > 2.0) t.temperature = 2.0;
  t.sample_index = sample_index;
  t.messages.push_back({Role::system, "system prompt"});
  t.messages.push_back({Role::user, "question " + qid});
  for (int i = 0; i < tool_calls; ++i) {
    t.messages.push_back({Role::assistant, "Thought: step.\nAction: calculator[1+" + std::to_string(i) + "]"});
    t.messages.push_back({Role::tool, i < errors ? "Observation: Error: boom" : "Observation: " + std::to_string(i + 1)});
  }
  t.tool_call_errors = errors;
  if (finished) {
    t.messages.push_back({Role::assistant, "Thought: done.\nAction: finish[" + answer + "]"});
    t.outcome = Outcome::finished(answer);
  } else {
    t.outcome = Outcome::of(OutcomeKind::turn_limit_exceeded);
  }
  int turns = 0;
  for (const auto& m : t.messages) turns += m.role == Role::assistant ? 1 : 0;
  t.assistant_turns = turns;
  return t;
}

inline LabeledTrajectory make_labeled(const std::string& qid, int sample_index, bool positive, double quality,
                                      TaskKind task = TaskKind::math, bool finished = true) {
  LabeledTrajectory lt;
  lt.trajectory = make_trajectory(qid, sample_index, finished, positive ? "right" : "wrong", 1, 0, task);
  lt.label = positive ? Label::positive : Label::negative;
  lt.quality = quality;
  if (finished) lt.extracted_answer = positive ? "right" : "wrong";
  return lt;
}

}  // namespace nat::testing
