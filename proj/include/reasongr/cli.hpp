#pragma once

#include <iosfwd>

namespace reasongr::cli {

// Process exit codes. Errors also print one JSON line to the error stream:
//   {"error":"<kind>","exit_code":N,"message":"..."}
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,     // bad or missing flag, unknown command
  kIo = 3,        // missing or unreadable file
  kParse = 4,     // malformed JSON
  kSchema = 5,    // schema or uniqueness violation, bad checkpoint
  kConfig = 6,    // invalid configuration value
  kTraining = 7,  // non-finite loss
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reasongr::cli
