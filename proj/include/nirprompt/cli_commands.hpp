#pragma once

#include <string>
#include <vector>

namespace nirprompt::cli {

// Full command dispatcher shared by the binary and the test suites.
// args excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args);

}  // namespace nirprompt::cli
