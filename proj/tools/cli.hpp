#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace compre::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitScorer = 3;

// Runs one compre-probe invocation. `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace compre::cli
