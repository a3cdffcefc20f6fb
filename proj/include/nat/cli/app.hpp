#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace nat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

struct ManifestInput {
  std::filesystem::path path;
  std::string sha256;
};

/// Deterministic JSON written to "<output>.manifest.json": command, version,
/// echoed configuration, argument list, and input/output file hashes.
std::string render_manifest(const std::string& command, const std::string& config_ini,
                            const std::vector<std::string>& args, const std::vector<std::filesystem::path>& inputs,
                            const std::vector<std::filesystem::path>& outputs);
void write_manifest(const std::filesystem::path& output, const std::string& manifest);

/// Entry point of the `nat` tool. Subcommands: collect, label,
/// build-dataset, evaluate, sweep, perplexity, strategies. Returns 0 on
/// success, 1 on validation/usage errors, 2 on I/O or transport errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nat::cli
