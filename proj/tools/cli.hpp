#pragma once

#include <string>
#include <vector>

#include "canonnet/errors.hpp"

namespace canonnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorKind kind) noexcept;

/// Runs one subcommand; args[0] is the program name. Returns the exit code.
int run(const std::vector<std::string>& args);

}  // namespace canonnet::cli
