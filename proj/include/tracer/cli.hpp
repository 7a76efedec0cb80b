#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace tracer {

/// Runs the command line given argv-style arguments (program name excluded).
/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace tracer
