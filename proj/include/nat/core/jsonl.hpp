#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nat/core/types.hpp"

namespace nat {

// Trajectory JSONL. One object per line, fields in this order:
//   question_id, task, model_id, temperature, sample_index, outcome,
//   extracted_answer, label, quality, tool_call_errors, messages
// `outcome` is {"status": <kind>} plus "answer" when finished. Unlabeled
// (freshly collected) trajectories carry null extracted_answer/label/quality.

std::string to_json_line(const LabeledTrajectory& labeled);
std::string to_json_line(const Trajectory& unlabeled);

void write_trajectories(std::span<const LabeledTrajectory> trajectories, std::ostream& out);
std::vector<LabeledTrajectory> read_trajectories(std::istream& in);

/// Collected trajectories before labeling; reading ignores any label fields.
void write_unlabeled(std::span<const Trajectory> trajectories, std::ostream& out);
std::vector<Trajectory> read_unlabeled(std::istream& in);

// Question JSONL: {"id", "task", "question", "answer"}; math answers are
// decimal strings, strategy_qa answers are "yes"/"no" (or JSON booleans).
std::string to_json_line(const Question& question);
void write_questions(std::span<const Question> questions, std::ostream& out);
std::vector<Question> read_questions(std::istream& in);

// File helpers; failures to open raise IoError.
std::vector<LabeledTrajectory> load_trajectories(const std::filesystem::path& path);
std::vector<Trajectory> load_unlabeled(const std::filesystem::path& path);
std::vector<Question> load_questions(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace nat
