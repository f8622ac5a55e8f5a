#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace stoshield {

/// 0 ok, 2 config, 3 numerical, 4 sampling, 5 validation failure, 1 anything else.
int exit_code_for(const std::exception& e) noexcept;

/// Entry point of the `stoshield` executable; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stoshield
