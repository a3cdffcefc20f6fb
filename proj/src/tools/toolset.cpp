#include "nat/tools/toolset.hpp"

#include <cctype>

#include "nat/agent/parse.hpp"
#include "nat/core/error.hpp"
#include "nat/core/strings.hpp"
#include "nat/tools/calculator.hpp"

namespace nat::tools {

namespace {
bool is_lower_identifier(std::string_view name) {
  if (name.empty() || !(std::islower(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (char c : name) {
    auto u = static_cast<unsigned char>(c);
    if (!(std::islower(u) || std::isdigit(u) || c == '_')) return false;
  }
  return true;
}
}  // namespace

void ToolSet::add(std::string name, ToolExecutor executor) {
  if (!is_lower_identifier(name)) throw ConfigError("tool name must be a lowercase identifier: \"" + name + "\"");
  if (name == agent::kFinishAction) throw ConfigError("tool name \"finish\" is reserved");
  if (!tools_.emplace(name, std::move(executor)).second) throw ConfigError("duplicate tool \"" + name + "\"");
}

bool ToolSet::contains(std::string_view name) const { return tools_.find(name) != tools_.end(); }

std::vector<std::string> ToolSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : tools_) out.push_back(name);
  return out;
}

ObservationResult ToolSet::execute(std::string_view name, std::string_view argument) const {
  auto it = tools_.find(name);
  if (it == tools_.end()) {
    return ObservationResult::error("unknown tool '" + std::string(name) +
                                    "'; available: " + strings::join(names(), ", "));
  }
  return it->second(argument);
}

ToolSet calculator_toolset() {
  ToolSet tools;
  tools.add(std::string(kCalculatorTool), [](std::string_view arg) { return calc_eval(arg); });
  return tools;
}

ToolSet search_toolset(std::shared_ptr<SearchClient> client, std::shared_ptr<Reranker> reranker, std::size_t top_k) {
  ToolSet tools;
  tools.add(std::string(kSearchTool), [client = std::move(client), reranker = std::move(reranker),
                                       top_k](std::string_view arg) { return search_tool(arg, *client, *reranker, top_k); });
  return tools;
}

}  // namespace nat::tools
