#pragma once

// Command-line front end. Commands: generate, walk, evaluate, sweep, report,
// curriculum. Each takes `--config PATH`, `--out DIR` and `--key value`
// overrides; a trailing `--flag` with no value means `on`.

#include <iosfwd>
#include <string>
#include <vector>

namespace sparsefoot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPropertyGate = 3;

/// `args` excludes the program name. Never throws; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparsefoot
