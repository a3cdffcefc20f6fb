#include "nat/reformat/reformat.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "nat/core/error.hpp"
#include "nat/core/strings.hpp"

namespace nat::reformat {

using ojson = nlohmann::ordered_json;

std::string PromptStrategy::inference_prompt() const { return prompt_for(kPositiveClass); }

std::string PromptStrategy::prompt_for(ClassId cls) const {
  auto it = class_prompts.find(cls);
  return it == class_prompts.end() ? std::string() : it->second;
}

void validate(const PromptStrategy& strategy) {
  if (strategy.name.empty()) throw ConfigError("strategy name must be non-empty");
  if (strategy.class_prompts.empty()) return;
  std::set<ClassId> expected{kPositiveClass};
  for (int k = 0; k < strategy.buckets.negative_class_count(); ++k) expected.insert(k);
  std::set<ClassId> actual;
  for (const auto& [cls, prompt] : strategy.class_prompts) {
    if (prompt.empty()) throw ConfigError("strategy " + strategy.name + ": empty prompt for " + labeling::class_name(cls));
    actual.insert(cls);
  }
  if (actual != expected) throw ConfigError("strategy " + strategy.name + ": prompts must cover every class exactly");
  if (!strategy.uses_negatives && strategy.class_prompts.size() > 1)
    throw ConfigError("strategy " + strategy.name + ": negative prompts on a positives-only strategy");
}

std::vector<PromptStrategy> builtin_strategies() {
  auto two_class = [](std::string name, Placement placement, std::string_view pos, std::string_view neg) {
    PromptStrategy s;
    s.name = std::move(name);
    s.placement = placement;
    s.class_prompts = {{kPositiveClass, std::string(pos)}, {0, std::string(neg)}};
    return s;
  };

  std::vector<PromptStrategy> out;
  PromptStrategy vanilla;
  vanilla.name = "vanilla";
  vanilla.uses_negatives = false;
  out.push_back(vanilla);

  PromptStrategy nut;
  nut.name = "nut";
  out.push_back(nut);

  out.push_back(two_class("nat", Placement::suffix, kCorrectPrompt, kIncorrectPrompt));
  out.push_back(two_class("nat_swapped", Placement::suffix, kIncorrectPrompt, kCorrectPrompt));
  out.push_back(two_class("nat_goodbad", Placement::suffix, kGoodPrompt, kBadPrompt));
  out.push_back(two_class("nat_letters", Placement::prefix, "A", "B"));
  out.push_back(two_class("nat_random", Placement::suffix, kRandomPositive, kRandomNegative));

  PromptStrategy nat2;
  nat2.name = "nat2";
  nat2.buckets = QualityBuckets({0.4});
  nat2.class_prompts = {{kPositiveClass, std::string(kCorrectPrompt)},
                        {0, std::string(kIncorrectPrompt)},
                        {1, std::string(kMostlyCorrectPrompt)}};
  out.push_back(nat2);
  return out;
}

PromptStrategy find_strategy(std::string_view name) {
  auto key = strings::to_lower(name);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "nat_2") key = "nat2";
  for (auto& s : builtin_strategies()) {
    if (s.name == key) return s;
  }
  std::vector<std::string> names;
  for (const auto& s : builtin_strategies()) names.push_back(s.name);
  throw ConfigError("unknown strategy \"" + std::string(name) + "\" (known: " + strings::join(names, ", ") + ")");
}

ClassId trajectory_class(const LabeledTrajectory& lt, const PromptStrategy& strategy) {
  if (lt.positive()) return kPositiveClass;
  auto cls = labeling::bucket_quality(lt.quality, strategy.buckets);
  if (cls == kPositiveClass) throw ValidationError("quality: negative trajectory with quality 1.0");
  return cls;
}

std::optional<DatasetRecord> apply_strategy(const LabeledTrajectory& lt, const PromptStrategy& strategy,
                                            PromptRole role) {
  std::string prompt;
  ClassId cls = kPositiveClass;
  if (role == PromptRole::train) {
    if (!lt.positive() && !strategy.uses_negatives) return std::nullopt;
    cls = trajectory_class(lt, strategy);
    prompt = strategy.prompt_for(cls);
  } else {
    prompt = strategy.inference_prompt();
  }

  DatasetRecord record;
  record.messages = lt.trajectory.messages;
  for (auto& m : record.messages) {
    if (m.role == Role::user) {
      m.content = attach_prompt(m.content, strategy.placement, prompt);
      break;
    }
  }
  record.loss_mask.reserve(record.messages.size());
  for (const auto& m : record.messages) record.loss_mask.push_back(m.role == Role::assistant);
  record.meta = {lt.trajectory.source_id(), lt.label, lt.quality, strategy.name, cls};
  return record;
}

std::vector<LabeledTrajectory> filter_negatives(std::span<const LabeledTrajectory> pool, TaskKind task) {
  std::vector<LabeledTrajectory> out;
  for (const auto& lt : pool) {
    if (!lt.positive()) {
      const auto kind = lt.trajectory.outcome.kind;
      if (task == TaskKind::multihop_qa) {
        if (kind != OutcomeKind::finished || lt.quality == 0.0) continue;
      } else if (kind == OutcomeKind::parse_failure || kind == OutcomeKind::tool_failure_abort) {
        continue;
      }
    }
    out.push_back(lt);
  }
  return out;
}

std::vector<LabeledTrajectory> dedup_positives(std::span<const LabeledTrajectory> pool) {
  std::unordered_map<std::string, std::size_t> best;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].positive()) continue;
    const auto& t = pool[i].trajectory;
    auto [it, inserted] = best.emplace(t.question_id, i);
    if (inserted) continue;
    const auto& cur = pool[it->second].trajectory;
    if (std::pair(t.temperature, t.sample_index) < std::pair(cur.temperature, cur.sample_index)) it->second = i;
  }
  std::vector<LabeledTrajectory> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].positive() && best.at(pool[i].trajectory.question_id) != i) continue;
    out.push_back(pool[i]);
  }
  return out;
}

Pools prepare_pools(std::span<const LabeledTrajectory> labeled) {
  Pools pools;
  for (const auto& lt : dedup_positives(labeled)) {
    if (lt.positive()) {
      pools.positives.push_back(lt);
    } else {
      std::span<const LabeledTrajectory> one(&lt, 1);
      auto kept = filter_negatives(one, lt.trajectory.task);
      pools.negatives.insert(pools.negatives.end(), kept.begin(), kept.end());
    }
  }
  return pools;
}

SeededShuffler::SeededShuffler(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SeededShuffler::below(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("SeededShuffler::below: empty range");
  const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  while (true) {
    std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

std::vector<std::size_t> SeededShuffler::sample(std::size_t n, std::size_t count) {
  if (count > n) throw ValidationError("cannot sample " + std::to_string(count) + " of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + below(n - i)]);
  idx.resize(count);
  return idx;
}

std::vector<DatasetRecord> build_mixture(std::span<const LabeledTrajectory> positives,
                                         std::span<const LabeledTrajectory> negatives, std::size_t n_pos,
                                         std::size_t n_neg, const PromptStrategy& strategy, std::uint64_t seed) {
  validate(strategy);
  if (!strategy.uses_negatives && n_neg > 0)
    throw ValidationError("strategy " + strategy.name + " trains on positives only; n_neg must be 0");
  if (n_pos > positives.size())
    throw ValidationError("insufficient positives: requested " + std::to_string(n_pos) + ", available " +
                          std::to_string(positives.size()) + " (shortfall " +
                          std::to_string(n_pos - positives.size()) + ")");
  if (n_neg > negatives.size())
    throw ValidationError("insufficient negatives: requested " + std::to_string(n_neg) + ", available " +
                          std::to_string(negatives.size()) + " (shortfall " +
                          std::to_string(n_neg - negatives.size()) + ")");

  SeededShuffler rng(seed);
  std::vector<DatasetRecord> records;
  records.reserve(n_pos + n_neg);
  for (auto i : rng.sample(positives.size(), n_pos)) {
    if (!positives[i].positive()) throw ValidationError("positive pool contains a negative trajectory");
    records.push_back(*apply_strategy(positives[i], strategy, PromptRole::train));
  }
  for (auto i : rng.sample(negatives.size(), n_neg)) {
    if (negatives[i].positive()) throw ValidationError("negative pool contains a positive trajectory");
    records.push_back(*apply_strategy(negatives[i], strategy, PromptRole::train));
  }
  rng.shuffle(records);
  return records;
}

std::string to_json_line(const DatasetRecord& record) {
  if (record.loss_mask.size() != record.messages.size())
    throw ValidationError("loss_mask: length differs from messages");
  if (!std::isfinite(record.meta.quality)) throw ValidationError("quality: NaN/inf cannot be serialized");
  ojson j;
  ojson msgs = ojson::array();
  for (std::size_t i = 0; i < record.messages.size(); ++i) {
    ojson m;
    m["role"] = to_string(record.messages[i].role);
    m["content"] = record.messages[i].content;
    m["train"] = static_cast<bool>(record.loss_mask[i]);
    msgs.push_back(std::move(m));
  }
  j["messages"] = std::move(msgs);
  ojson meta;
  meta["source"] = record.meta.source;
  meta["label"] = to_string(record.meta.label);
  meta["quality"] = record.meta.quality;
  meta["strategy"] = record.meta.strategy;
  meta["class"] = labeling::class_name(record.meta.cls);
  j["meta"] = std::move(meta);
  return j.dump(-1, ' ', false, ojson::error_handler_t::strict);
}

void emit_dataset(std::span<const DatasetRecord> records, std::ostream& out) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw IoError("write failed");
}

namespace {
ClassId parse_class(const std::string& name) {
  if (name == "positive") return kPositiveClass;
  constexpr std::string_view prefix = "negative_";
  if (name.starts_with(prefix)) {
    try {
      std::size_t used = 0;
      int k = std::stoi(name.substr(prefix.size()), &used);
      if (k >= 0 && used == name.size() - prefix.size()) return k;
    } catch (const std::exception&) {
    }
  }
  throw ValidationError("class: unknown class \"" + name + "\"");
}
}  // namespace

std::vector<DatasetRecord> read_dataset(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto j = ojson::parse(line);
      DatasetRecord r;
      for (const auto& m : j.at("messages")) {
        Message msg{parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()};
        bool train = m.at("train").get<bool>();
        if (train && msg.role != Role::assistant) throw ValidationError("train: set on a non-assistant message");
        r.messages.push_back(std::move(msg));
        r.loss_mask.push_back(train);
      }
      const auto& meta = j.at("meta");
      r.meta.source = meta.at("source").get<std::string>();
      r.meta.label = parse_label(meta.at("label").get<std::string>());
      r.meta.quality = meta.at("quality").get<double>();
      r.meta.strategy = meta.at("strategy").get<std::string>();
      r.meta.cls = parse_class(meta.at("class").get<std::string>());
      out.push_back(std::move(r));
    } catch (const ojson::parse_error& e) {
      throw LineError(number, std::string("malformed JSON: ") + e.what());
    } catch (const ojson::exception& e) {
      throw LineError(number, e.what());
    } catch (const ValidationError& e) {
      throw LineError(number, e.what());
    }
  }
  return out;
}

}  // namespace nat::reformat
