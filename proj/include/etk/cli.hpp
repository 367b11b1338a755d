#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace etk {

/// "1,2,5", "1-20", a mix of both, or the path of a file holding such lists.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Entry point of the etksim tool. Returns the process exit code.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace etk
