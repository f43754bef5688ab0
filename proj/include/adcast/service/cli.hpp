#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace adcast::service {

/// The umbrella command line. `args` excludes the program name.
/// Returns 0 on success, 1 on invalid input (usage, validation, missing
/// artifacts) and 2 on internal errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace adcast::service
