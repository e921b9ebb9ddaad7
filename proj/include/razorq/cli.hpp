// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every subcommand prints one JSON summary to `out`
// and writes files atomically. Exit codes: 0 success, 1 bad input or usage,
// 2 internal error.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace razorq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;

/// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace razorq::cli
