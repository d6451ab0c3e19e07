#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace surropt::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

std::string read_file(const std::filesystem::path& path);

/// Creates parent directories; throws IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

}  // namespace surropt::io
