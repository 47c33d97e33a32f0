#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace omt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCellFailures = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `omt` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses `key = value` lines (`#` comments, blank lines skipped). Keys not
/// in `allowed` raise std::invalid_argument naming the key and line.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path,
                                                   const std::vector<std::string>& allowed);

/// OMT_DATA_DIR if set, else "data".
std::filesystem::path default_data_dir();

}  // namespace omt
