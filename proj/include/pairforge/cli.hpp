#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pairforge::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes: 0 success, 1 verification errors, 2 usage errors, 3 runtime errors.
// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pairforge::cli
