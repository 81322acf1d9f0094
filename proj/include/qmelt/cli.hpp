// cli.hpp — Subcommand dispatch for the qmelt tool.

#pragma once

#include <string>
#include <vector>

namespace qmelt::cli {

// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 partial results.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitPartial = 4;

int dispatch(const std::vector<std::string>& args);

}  // namespace qmelt::cli
