#include "nat/core/jsonl.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nat/core/error.hpp"

namespace nat {

using ojson = nlohmann::ordered_json;

namespace {

std::string dump(const ojson& j) {
  try {
    return j.dump(-1, ' ', false, ojson::error_handler_t::strict);
  } catch (const ojson::exception& e) {
    throw ValidationError(std::string("serialization failed: ") + e.what());
  }
}

ojson messages_json(const std::vector<Message>& messages) {
  ojson arr = ojson::array();
  for (const auto& m : messages) {
    ojson jm;
    jm["role"] = to_string(m.role);
    jm["content"] = m.content;
    arr.push_back(std::move(jm));
  }
  return arr;
}

ojson outcome_json(const Outcome& outcome) {
  ojson j;
  j["status"] = to_string(outcome.kind);
  if (outcome.is_finished()) j["answer"] = outcome.answer;
  return j;
}

ojson trajectory_json(const Trajectory& t, const LabeledTrajectory* labeled) {
  if (!std::isfinite(t.temperature)) throw ValidationError("temperature: not a finite number");
  ojson j;
  j["question_id"] = t.question_id;
  j["task"] = to_string(t.task);
  j["model_id"] = t.model_id;
  j["temperature"] = t.temperature;
  j["sample_index"] = t.sample_index;
  j["outcome"] = outcome_json(t.outcome);
  if (labeled) {
    if (!std::isfinite(labeled->quality)) throw ValidationError("quality: NaN/inf cannot be serialized");
    j["extracted_answer"] = labeled->extracted_answer ? ojson(*labeled->extracted_answer) : ojson(nullptr);
    j["label"] = to_string(labeled->label);
    j["quality"] = labeled->quality;
  } else {
    j["extracted_answer"] = nullptr;
    j["label"] = nullptr;
    j["quality"] = nullptr;
  }
  j["tool_call_errors"] = t.tool_call_errors;
  j["messages"] = messages_json(t.messages);
  return j;
}

const ojson& require(const ojson& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ValidationError(std::string(field) + ": missing");
  return *it;
}

std::string require_string(const ojson& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_string()) throw ValidationError(std::string(field) + ": expected a string");
  return v.get<std::string>();
}

int require_int(const ojson& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_number_integer()) throw ValidationError(std::string(field) + ": expected an integer");
  return v.get<int>();
}

double require_number(const ojson& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_number()) throw ValidationError(std::string(field) + ": expected a number");
  return v.get<double>();
}

Trajectory parse_trajectory(const ojson& j) {
  if (!j.is_object()) throw ValidationError("record: expected a JSON object");
  Trajectory t;
  t.question_id = require_string(j, "question_id");
  t.task = parse_task_kind(require_string(j, "task"));
  t.model_id = require_string(j, "model_id");
  t.temperature = require_number(j, "temperature");
  t.sample_index = require_int(j, "sample_index");
  const auto& outcome = require(j, "outcome");
  if (!outcome.is_object()) throw ValidationError("outcome: expected an object");
  t.outcome.kind = parse_outcome_kind(require_string(outcome, "status"));
  if (t.outcome.is_finished()) t.outcome.answer = require_string(outcome, "answer");
  t.tool_call_errors = require_int(j, "tool_call_errors");
  const auto& msgs = require(j, "messages");
  if (!msgs.is_array()) throw ValidationError("messages: expected an array");
  for (const auto& m : msgs) {
    if (!m.is_object()) throw ValidationError("messages: expected objects");
    t.messages.push_back({parse_role(require_string(m, "role")), require_string(m, "content")});
  }
  t.assistant_turns = static_cast<int>(std::count_if(
      t.messages.begin(), t.messages.end(), [](const Message& m) { return m.role == Role::assistant; }));
  return t;
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
      throw LineError(number, std::string("malformed JSON: ") + e.what());
    }
    try {
      fn(j);
    } catch (const LineError&) {
      throw;
    } catch (const ValidationError& e) {
      throw LineError(number, e.what());
    } catch (const ojson::exception& e) {
      throw LineError(number, e.what());
    }
  }
  if (in.bad()) throw IoError("read failed");
}

}  // namespace

std::string to_json_line(const LabeledTrajectory& labeled) {
  return dump(trajectory_json(labeled.trajectory, &labeled));
}

std::string to_json_line(const Trajectory& unlabeled) { return dump(trajectory_json(unlabeled, nullptr)); }

void write_trajectories(std::span<const LabeledTrajectory> trajectories, std::ostream& out) {
  for (const auto& t : trajectories) out << to_json_line(t) << '\n';
  if (!out) throw IoError("write failed");
}

std::vector<LabeledTrajectory> read_trajectories(std::istream& in) {
  std::vector<LabeledTrajectory> out;
  for_each_line(in, [&](const ojson& j) {
    LabeledTrajectory lt;
    lt.trajectory = parse_trajectory(j);
    const auto& extracted = require(j, "extracted_answer");
    if (extracted.is_string()) {
      lt.extracted_answer = extracted.get<std::string>();
    } else if (!extracted.is_null()) {
      throw ValidationError("extracted_answer: expected a string or null");
    }
    lt.label = parse_label(require_string(j, "label"));
    lt.quality = require_number(j, "quality");
    validate(lt);
    out.push_back(std::move(lt));
  });
  return out;
}

void write_unlabeled(std::span<const Trajectory> trajectories, std::ostream& out) {
  for (const auto& t : trajectories) out << to_json_line(t) << '\n';
  if (!out) throw IoError("write failed");
}

std::vector<Trajectory> read_unlabeled(std::istream& in) {
  std::vector<Trajectory> out;
  for_each_line(in, [&](const ojson& j) {
    auto t = parse_trajectory(j);
    validate(t);
    out.push_back(std::move(t));
  });
  return out;
}

std::string to_json_line(const Question& q) {
  ojson j;
  j["id"] = q.id;
  j["task"] = to_string(q.task);
  j["question"] = q.text;
  j["answer"] = gold_text(q.gold);
  return dump(j);
}

void write_questions(std::span<const Question> questions, std::ostream& out) {
  for (const auto& q : questions) out << to_json_line(q) << '\n';
  if (!out) throw IoError("write failed");
}

std::vector<Question> read_questions(std::istream& in) {
  std::vector<Question> out;
  std::set<std::string> seen;
  for_each_line(in, [&](const ojson& j) {
    if (!j.is_object()) throw ValidationError("record: expected a JSON object");
    Question q;
    q.id = require_string(j, "id");
    q.task = parse_task_kind(require_string(j, "task"));
    q.text = require_string(j, "question");
    const auto& answer = require(j, "answer");
    switch (q.task) {
      case TaskKind::math:
        if (answer.is_string()) {
          q.gold = NumericGold{answer.get<std::string>()};
        } else if (answer.is_number_integer()) {
          q.gold = NumericGold{answer.dump()};
        } else {
          throw ValidationError("answer: math answers must be decimal strings or integers");
        }
        break;
      case TaskKind::multihop_qa:
        if (!answer.is_string()) throw ValidationError("answer: expected a string");
        q.gold = TextGold{answer.get<std::string>()};
        break;
      case TaskKind::strategy_qa:
        if (answer.is_boolean()) {
          q.gold = BooleanGold{answer.get<bool>()};
        } else if (answer.is_string() && (answer == "yes" || answer == "no")) {
          q.gold = BooleanGold{answer == "yes"};
        } else {
          throw ValidationError("answer: strategy_qa answers must be yes/no");
        }
        break;
    }
    validate(q);
    if (!seen.insert(q.id).second) throw ValidationError("id: duplicate \"" + q.id + "\"");
    out.push_back(std::move(q));
  });
  return out;
}

namespace {
std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}
}  // namespace

std::vector<LabeledTrajectory> load_trajectories(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_trajectories(in);
}

std::vector<Trajectory> load_unlabeled(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_unlabeled(in);
}

std::vector<Question> load_questions(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_questions(in);
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

}  // namespace nat
