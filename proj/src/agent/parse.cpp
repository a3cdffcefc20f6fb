#include "nat/agent/parse.hpp"

#include <cctype>

#include "nat/core/strings.hpp"
#include "nat/core/types.hpp"

namespace nat::agent {

namespace {

constexpr std::string_view kThoughtTag = "Thought:";
constexpr std::string_view kActionTag = "Action:";

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Offset of the first line that begins with "Action:", or npos.
std::size_t find_action_line(std::string_view text) {
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    auto line_end = text.find('\n', line_start);
    auto line = text.substr(line_start, line_end == std::string_view::npos ? std::string_view::npos
                                                                          : line_end - line_start);
    auto lead = line.find_first_not_of(" \t\r");
    if (lead != std::string_view::npos && line.substr(lead).starts_with(kActionTag)) {
      return line_start + lead;
    }
    if (line_end == std::string_view::npos) break;
    line_start = line_end + 1;
  }
  return std::string_view::npos;
}

}  // namespace

ParsedStep parse_step(std::string_view assistant_text) {
  const std::string raw(assistant_text);
  auto unparseable = [&] { return ParsedStep{{}, Unparseable{raw}}; };

  auto text = strings::trim(assistant_text);
  auto action_pos = find_action_line(text);
  if (action_pos == std::string_view::npos) return unparseable();

  std::string thought;
  auto head = strings::trim(text.substr(0, action_pos));
  if (!head.empty()) {
    if (!head.starts_with(kThoughtTag)) return unparseable();
    thought = std::string(strings::trim(head.substr(kThoughtTag.size())));
  }

  auto rest = text.substr(action_pos + kActionTag.size());
  std::size_t i = 0;
  while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
  if (i == rest.size() || !is_ident_start(rest[i])) return unparseable();
  std::size_t name_start = i;
  while (i < rest.size() && is_ident_char(rest[i])) ++i;
  std::string name(rest.substr(name_start, i - name_start));
  if (i == rest.size() || rest[i] != '[') return unparseable();

  std::size_t arg_start = ++i;
  int depth = 1;
  for (; i < rest.size(); ++i) {
    if (rest[i] == '[') {
      ++depth;
    } else if (rest[i] == ']' && --depth == 0) {
      break;
    }
  }
  if (depth != 0) return unparseable();
  auto argument = std::string(strings::trim(rest.substr(arg_start, i - arg_start)));
  if (!strings::trim(rest.substr(i + 1)).empty()) return unparseable();

  if (name == kFinishAction) return ParsedStep{std::move(thought), Finish{std::move(argument)}};
  return ParsedStep{std::move(thought), ToolCall{std::move(name), std::move(argument)}};
}

std::optional<std::string> extract_marked_answer(std::string_view text) {
  auto pos = text.rfind(kCotAnswerMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  auto rest = text.substr(pos + kCotAnswerMarker.size());
  rest = rest.substr(0, rest.find('\n'));
  rest = strings::trim(rest);
  constexpr std::string_view kTrailing = ".,;:!? \t\r";
  while (!rest.empty() && kTrailing.find(rest.back()) != std::string_view::npos) rest.remove_suffix(1);
  // a leading colon as in "The answer is: 42"
  while (!rest.empty() && (rest.front() == ':' || std::isspace(static_cast<unsigned char>(rest.front())))) rest.remove_prefix(1);
  if (rest.empty()) return std::nullopt;
  return std::string(rest);
}

}  // namespace nat::agent
