#pragma once

#include <iosfwd>

namespace fewboost::cli {

// Exit codes: 0 success, 1 usage/validation/I-O error, 2 partial benchmark
// failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

// Subcommands: bench, train, predict, stack, calibrate. Diagnostics go to
// `err`, progress summaries to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace fewboost::cli
