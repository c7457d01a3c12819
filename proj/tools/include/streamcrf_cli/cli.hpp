#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace streamcrf::cli {

/// Entry point of the `streamcrf` tool. Returns the process exit code:
/// 0 when every check of the subcommand passed, 1 when a check failed,
/// 2 on bad input or a refused request.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace streamcrf::cli
