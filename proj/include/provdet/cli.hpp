#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace provdet::cli {

// Exit codes. Failures also print "error[<category>]: <message>" to the
// diagnostic stream, category one of usage, io, parse, auth, validation,
// internal.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitValidation = 4;

// `args` excludes the program name. Data goes to files named by flags;
// `out` receives help text only, `err` receives logs and report tables.
int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace provdet::cli
