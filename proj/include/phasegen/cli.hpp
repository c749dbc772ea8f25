#pragma once

#include <string>
#include <vector>

namespace phasegen::cli {

// Parses and executes one command line (program name excluded).  Returns the
// process exit code: 0 on success, 1 for usage or validation problems, 2 for
// runtime or data errors.
int run(const std::vector<std::string>& args);

}  // namespace phasegen::cli
