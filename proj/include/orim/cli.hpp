#pragma once

#include <string>
#include <vector>

namespace orim {

// Exit codes: 0 success, 1 usage/input error, 2 numerical failure.
int cli_main(const std::vector<std::string>& args);

}  // namespace orim
