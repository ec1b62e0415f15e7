#pragma once

#include <string>
#include <vector>

namespace lqo {

/// Full command-line entry point, callable in-process for tests. `args`
/// excludes the program name. Returns the process exit code: 0 success,
/// 1 config/runtime error, 2 usage error, 3 integrity error.
int dispatch(std::vector<std::string> args);

}  // namespace lqo
