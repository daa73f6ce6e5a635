#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

namespace jini {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

/// Entry point of the `jini` tool: fit, experiment, bias-probe, trace.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Writes to a temporary sibling file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace jini
