#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccoov {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 other failure.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccoov
