#include "nat/tools/observation.hpp"

namespace nat::tools {

ObservationResult ObservationResult::error(std::string_view message) {
  std::string line;
  line.reserve(message.size());
  for (char c : message) line.push_back(c == '\n' || c == '\r' ? ' ' : c);
  return ObservationResult(false, std::move(line));
}

std::string ObservationResult::render() const {
  std::string out(kObservationPrefix);
  if (!ok_) out += kErrorPrefix;
  out += text_;
  return out;
}

}  // namespace nat::tools
