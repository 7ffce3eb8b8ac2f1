#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fairreg/version.hpp"

namespace fairreg::cli {

using fairreg::kVersion;

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Failures print exactly one line "error: <category>: <message>" to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fairreg::cli
