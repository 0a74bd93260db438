#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace featstat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNoStop = 1;
inline constexpr int kExitUserError = 2;

/// Runs one featstat command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace featstat::cli
