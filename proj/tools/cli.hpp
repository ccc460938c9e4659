#pragma once

// The `geoloss` command line, callable in-process for tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace geoloss::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // selftest failure, I/O error
inline constexpr int kUsage = 2;
inline constexpr int kParse = 3;
inline constexpr int kSolver = 4;

// args[0] is the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Quick oracle and invariant checks; one PASS/FAIL line each.
bool RunSelfTest(unsigned long long seed, std::ostream& out);

}  // namespace geoloss::cli
