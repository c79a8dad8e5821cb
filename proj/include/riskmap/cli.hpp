#pragma once

#include <ostream>

namespace riskmap {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

// Entry point of `riskmap <fit|simulate|diagnose|forecast|report> [--config
// file] [--key value ...]`. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace riskmap
