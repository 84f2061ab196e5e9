#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace framescope::cli {

// Runs one CLI invocation. `args` excludes the program name. Reports go to
// `out` as JSON; failures print one JSON line {"error": kind, "message": ...}
// to `err` and return nonzero (2 for usage/argument errors, 1 otherwise).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace framescope::cli
