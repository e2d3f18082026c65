#pragma once

#include <string>
#include <vector>

namespace gswan {

// Entry point behind the gswan binary; args exclude the program name.
// Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace gswan
