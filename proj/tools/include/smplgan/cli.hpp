#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smplgan::cli {

// Runs one command. args excludes the program name. Returns 0 on success,
// 1 on a validation error (bad flags or inputs), 2 on a runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smplgan::cli
