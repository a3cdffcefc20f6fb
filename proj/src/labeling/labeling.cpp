#include "nat/labeling/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <unordered_map>

#include <boost/multiprecision/cpp_int.hpp>

#include "nat/agent/parse.hpp"
#include "nat/core/error.hpp"
#include "nat/core/strings.hpp"

namespace nat::labeling {

namespace mp = boost::multiprecision;
using Rational = mp::cpp_rational;
using Int = mp::cpp_int;

std::string normalize_text(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    cleaned.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
  }
  std::vector<std::string> kept;
  for (auto& token : strings::split_whitespace(cleaned)) {
    if (token == "a" || token == "an" || token == "the") continue;
    kept.push_back(std::move(token));
  }
  return strings::join(kept, " ");
}

int exact_match(std::string_view pred, std::string_view gold) {
  return normalize_text(pred) == normalize_text(gold) ? 1 : 0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  auto p = strings::split_whitespace(normalize_text(pred));
  auto g = strings::split_whitespace(normalize_text(gold));
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  int common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / static_cast<double>(p.size());
  double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

// cpp_int's string constructor reads a leading 0 as an octal prefix.
Int decimal_int(const std::string& digits) {
  auto first = digits.find_first_not_of('0');
  return first == std::string::npos ? Int(0) : Int(digits.substr(first));
}

std::optional<Rational> parse_decimal(const std::string& digits_with_point) {
  auto dot = digits_with_point.find('.');
  std::string whole = digits_with_point.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : digits_with_point.substr(dot + 1);
  std::string all = whole + frac;
  if (all.empty()) return std::nullopt;
  return Rational(decimal_int(all), mp::pow(Int(10), static_cast<unsigned>(frac.size())));
}

std::optional<Rational> parse_loose_number(std::string_view pred) {
  std::string s(strings::trim(pred));
  // "1/3 (0.333333)": drop a trailing parenthesized approximation
  if (!s.empty() && s.back() == ')') {
    auto open = s.rfind('(');
    if (open != std::string::npos && open > 0) s = std::string(strings::trim(std::string_view(s).substr(0, open)));
  }
  static const std::vector<std::string> kCurrency{"$", ",", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5", "\xE2\x82\xB9"};
  for (const auto& sym : kCurrency) {
    for (auto pos = s.find(sym); pos != std::string::npos; pos = s.find(sym)) s.erase(pos, sym.size());
  }
  static const std::regex kNumber(R"(^\s*([+-]?)\s*(\d+(?:\.\d*)?|\.\d+)(?:\s*/\s*(\d+))?([^0-9]*)$)");
  std::smatch m;
  if (!std::regex_match(s, m, kNumber)) return std::nullopt;
  auto value = parse_decimal(m[2].str());
  if (!value) return std::nullopt;
  if (m[3].matched) {
    Int den = decimal_int(m[3].str());
    if (den == 0 || m[2].str().find('.') != std::string::npos) return std::nullopt;
    *value /= Rational(den);
  }
  if (m[1].str() == "-") *value = -*value;
  return value;
}

}  // namespace

bool numeric_match(std::string_view pred, std::string_view gold_decimal) {
  auto gold = parse_loose_number(gold_decimal);
  if (!gold) throw ValidationError("gold answer is not a decimal: \"" + std::string(gold_decimal) + "\"");
  auto value = parse_loose_number(pred);
  if (!value) return false;
  Rational scale = mp::max(Rational(1), mp::abs(*gold));
  return mp::abs(*value - *gold) * 1000000 <= scale;
}

std::optional<std::string> extract_answer(const Trajectory& trajectory, agent::EpisodeMode mode) {
  if (mode == agent::EpisodeMode::react) {
    if (!trajectory.outcome.is_finished()) return std::nullopt;
    const auto& msgs = trajectory.messages;
    if (msgs.empty() || msgs.back().role != Role::assistant) return std::nullopt;
    auto step = agent::parse_step(msgs.back().content);
    if (const auto* finish = std::get_if<agent::Finish>(&step.action)) return finish->answer;
    return std::nullopt;
  }
  for (auto it = trajectory.messages.rbegin(); it != trajectory.messages.rend(); ++it) {
    if (it->role == Role::assistant) return agent::extract_marked_answer(it->content);
  }
  return std::nullopt;
}

std::optional<std::string> extract_answer(const Trajectory& trajectory) {
  return extract_answer(trajectory, is_cot_shaped(trajectory) ? agent::EpisodeMode::cot : agent::EpisodeMode::react);
}

LabeledTrajectory label_trajectory(const Trajectory& trajectory, const Question& question) {
  if (trajectory.question_id != question.id)
    throw ValidationError("question_id: trajectory " + trajectory.question_id + " labeled against question " +
                          question.id);
  if (trajectory.task != question.task) throw ValidationError("task: trajectory and question disagree");

  LabeledTrajectory out;
  out.trajectory = trajectory;
  out.extracted_answer = extract_answer(trajectory);
  out.label = Label::negative;
  out.quality = 0.0;
  if (!out.extracted_answer) return out;
  const std::string& pred = *out.extracted_answer;

  switch (question.task) {
    case TaskKind::math:
      if (numeric_match(pred, std::get<NumericGold>(question.gold).decimal)) out.quality = 1.0;
      break;
    case TaskKind::multihop_qa:
      out.quality = token_f1(pred, std::get<TextGold>(question.gold).text);
      break;
    case TaskKind::strategy_qa: {
      auto normalized = normalize_text(pred);
      bool gold = std::get<BooleanGold>(question.gold).value;
      if ((normalized == "yes" || normalized == "no") && (normalized == "yes") == gold) out.quality = 1.0;
      break;
    }
  }
  if (out.quality == 1.0) out.label = Label::positive;
  return out;
}

std::vector<LabeledTrajectory> label_all(std::span<const Trajectory> trajectories,
                                         std::span<const Question> questions) {
  std::map<std::string, const Question*, std::less<>> by_id;
  for (const auto& q : questions) by_id.emplace(q.id, &q);
  std::vector<LabeledTrajectory> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) {
    auto it = by_id.find(t.question_id);
    if (it == by_id.end()) throw ValidationError("question_id: no question with id " + t.question_id);
    out.push_back(label_trajectory(t, *it->second));
  }
  return out;
}

std::string class_name(ClassId id) { return id == kPositiveClass ? "positive" : "negative_" + std::to_string(id); }

QualityBuckets::QualityBuckets(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    double b = boundaries_[i];
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("bucket boundaries must lie strictly inside (0, 1)");
    if (i > 0 && !(b > boundaries_[i - 1])) throw ConfigError("bucket boundaries must be strictly ascending");
  }
}

ClassId bucket_quality(double quality, const QualityBuckets& buckets) {
  if (!(quality >= 0.0 && quality <= 1.0)) throw ValidationError("quality out of range");
  if (quality == 1.0) return kPositiveClass;
  const auto& b = buckets.boundaries();
  return static_cast<ClassId>(std::upper_bound(b.begin(), b.end(), quality) - b.begin());
}

double action_error_rate(std::span<const Trajectory> trajectories) {
  long long errors = 0;
  long long attempts = 0;
  for (const auto& t : trajectories) {
    errors += t.tool_call_errors;
    attempts += static_cast<long long>(t.tool_message_count());
  }
  if (attempts == 0) return 0.0;
  return 100.0 * static_cast<double>(errors) / static_cast<double>(attempts);
}

double avg_turns(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw ValidationError("avg_turns: no trajectories");
  long long total = 0;
  for (const auto& t : trajectories) total += t.assistant_turns;
  return static_cast<double>(total) / static_cast<double>(trajectories.size());
}

}  // namespace nat::labeling
