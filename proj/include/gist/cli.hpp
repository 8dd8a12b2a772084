#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gist::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,   // unexpected error
  kUsage = 2,     // bad flags or configuration
  kData = 3,      // unreadable or malformed input
  kContract = 4,  // internal contract violated
};

/// Entry point of the `gist` tool. args excludes the program name.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

// Configuration is one flat key=value schema shared by every subcommand.
// Resolution order: built-in defaults, --config file, --set key=value, then
// dedicated flags such as --seed. A run.json manifest is also accepted as a
// --config file, which replays the run it describes.
struct KeySpec {
  const char* key;
  const char* fallback;  // empty string: unset
  const char* help;
};
std::span<const KeySpec> config_schema();

using Settings = std::map<std::string, std::string>;

/// Parses a key=value file (# comments, optional [section] headers are
/// ignored) or a run.json manifest. Unknown keys raise ConfigError.
Settings read_config_file(const std::filesystem::path& path);

/// Median of the values; mean of the middle pair for even counts.
std::optional<double> median(std::vector<double> values);

}  // namespace gist::cli
