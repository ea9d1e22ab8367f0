#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace riskgraph {

// Exit codes: 0 success, 1 domain error, 2 usage or parse error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. Errors go to `err` as {code, message, locus}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace riskgraph
