#pragma once

#include <string>
#include <vector>

namespace longrisk {

/// Runs one CLI invocation. args excludes the program name.
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

int cli_main(int argc, char** argv);

}  // namespace longrisk
