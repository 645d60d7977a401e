#pragma once

#include <string>
#include <vector>

namespace erc::cli {

// Entry point shared by the binary and the integration tests.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace erc::cli
