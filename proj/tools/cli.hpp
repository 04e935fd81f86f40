#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lesn::cli {

/// Executes one subcommand. `args` excludes the program name. Results go to
/// `out` unless --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lesn::cli
