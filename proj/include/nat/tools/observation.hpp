#pragma once

#include <string>
#include <string_view>

namespace nat::tools {

/// Result of running a tool: either text for the model or a tool error.
class ObservationResult {
public:
  static ObservationResult ok(std::string text) { return ObservationResult(true, std::move(text)); }
  /// Newlines in `message` are folded so the error stays on one line.
  static ObservationResult error(std::string_view message);

  [[nodiscard]] bool is_ok() const noexcept { return ok_; }
  [[nodiscard]] const std::string& text() const noexcept { return text_; }

  /// Message body for the tool turn: "Observation: <text>" or
  /// "Observation: Error: <message>".
  [[nodiscard]] std::string render() const;

  friend bool operator==(const ObservationResult&, const ObservationResult&) = default;

private:
  ObservationResult(bool ok, std::string text) : ok_(ok), text_(std::move(text)) {}

  bool ok_;
  std::string text_;
};

inline constexpr std::string_view kObservationPrefix = "Observation: ";
inline constexpr std::string_view kErrorPrefix = "Error: ";

}  // namespace nat::tools
