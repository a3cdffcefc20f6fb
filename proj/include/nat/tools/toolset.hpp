#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nat/core/types.hpp"
#include "nat/tools/observation.hpp"
#include "nat/tools/search.hpp"

namespace nat::tools {

using ToolExecutor = std::function<ObservationResult(std::string_view argument)>;

/// Registry of tools by name. Names are lowercase identifiers and "finish"
/// is reserved. Executors must tolerate concurrent calls.
class ToolSet {
public:
  /// Throws ConfigError for invalid, reserved or duplicate names.
  void add(std::string name, ToolExecutor executor);

  [[nodiscard]] bool contains(std::string_view name) const;
  [[nodiscard]] std::vector<std::string> names() const;

  /// Unknown tools yield a tool error listing the registered names.
  [[nodiscard]] ObservationResult execute(std::string_view name, std::string_view argument) const;

private:
  std::map<std::string, ToolExecutor, std::less<>> tools_;
};

inline constexpr std::string_view kCalculatorTool = "calculator";
inline constexpr std::string_view kSearchTool = "search";

ToolSet calculator_toolset();
ToolSet search_toolset(std::shared_ptr<SearchClient> client, std::shared_ptr<Reranker> reranker,
                       std::size_t top_k = kDefaultTopK);

}  // namespace nat::tools
