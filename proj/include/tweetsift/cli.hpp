#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tweetsift {

// args excludes the program name. Returns the process exit code:
// 0 success, 1 usage, 2 data, 3 numeric.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tweetsift
