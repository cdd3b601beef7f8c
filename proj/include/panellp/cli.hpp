#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace panellp {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 invalid input, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace panellp
