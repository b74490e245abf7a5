#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "adaptfeat/numerics.hpp"

namespace adaptfeat::csv {

/// Locale-independent shortest-safe rendering with 17 significant digits.
std::string format_double(double value);

/// Parses a double written by format_double (also accepts inf/nan).
double parse_double(std::string_view text);

/// One row per line, comma separated, '\n' line endings.
void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);
std::string to_string(const Matrix& m);

Matrix read_matrix(std::istream& in);
Matrix read_matrix(const std::filesystem::path& path);

}  // namespace adaptfeat::csv
