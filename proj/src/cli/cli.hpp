#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gcal::cli {

/// Entry point behind the `gcal` executable. args excludes the program name.
/// Returns 0 on success, 2 on usage errors, 1 on runtime errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gcal::cli
