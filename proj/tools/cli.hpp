// SPDX-License-Identifier: Apache-2.0
//
// The capgrpo command line, callable in-process for tests.

#ifndef CAPGRPO_TOOLS_CLI_HPP_
#define CAPGRPO_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace capgrpo::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,     // unexpected failure
  kUsage = 2,        // bad flags or verb
  kConfig = 3,       // bad configuration key or value
  kIo = 4,           // unreadable input or unwritable output
  kCheckFailed = 5,  // gradcheck over tolerance
  kData = 6,         // malformed checkpoint, metrics log or record file
};

// Default config file when --config is absent.
inline constexpr const char* kConfigEnvVar = "CAPGRPO_CONFIG";

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace capgrpo::cli

#endif  // CAPGRPO_TOOLS_CLI_HPP_
