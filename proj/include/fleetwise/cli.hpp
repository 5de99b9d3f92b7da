#pragma once

#include <string>
#include <vector>

namespace fleetwise::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 2;
inline constexpr int kIoError = 3;
inline constexpr int kValidationError = 4;
inline constexpr int kNumericalError = 5;

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without argv[0]

/// Internal-oracle self checks (KL closed form vs Monte Carlo, gradient
/// finite differences, the total-variance identity, rainflow reference).
/// Returns true when every check passes; prints one line per check.
bool selfcheck(std::uint64_t seed);

}  // namespace fleetwise::cli
