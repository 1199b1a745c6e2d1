#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smfpca::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smfpca::cli
