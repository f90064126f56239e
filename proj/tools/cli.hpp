#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sqa::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

/// Runs one `sqa` invocation; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqa::cli
