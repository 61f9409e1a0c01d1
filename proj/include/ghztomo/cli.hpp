// cli.hpp
// Entry point of the ghztomo command-line tool, kept in the library so the
// subcommands can be driven in-process by tests.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ghztomo/qlin.hpp"

namespace ghztomo::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kNotConverged = 3,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// ghz | werner:<p> | file:<path to a reconstruction file>
DensityMatrix resolve_preset(const std::string& preset);

}  // namespace ghztomo::cli
