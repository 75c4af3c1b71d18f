#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace generallog::text {

std::vector<std::string> split_whitespace(std::string_view line);
std::vector<std::string> split(std::string_view line, char delimiter);
std::string join(const std::vector<std::string>& parts, std::string_view separator);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);

/// Fixed-point with the given number of decimals ("%.*f").
std::string fixed(double value, int decimals);
/// Shortest text that round-trips a double ("%.17g").
std::string exact(double value);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Reads a whole file; throws Error(Io) on failure.
std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);
/// Writes a whole file, creating parent directories; throws Error(Io) on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace generallog::text
