#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tpf {

enum ExitCode { kOk = 0, kUsage = 1, kCompileError = 2, kRuntimeError = 3 };

// args excludes the program name
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tpf
