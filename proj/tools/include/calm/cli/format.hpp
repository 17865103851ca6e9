#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace calm::cli {

/// Shortest-form rendering with 9 significant digits, '.' as the decimal
/// separator whatever the locale. Non-finite values print as nan, inf, -inf.
std::string format_number(double value);

/// Writes `content` to `path` through a temporary file in the same
/// directory, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

/// Current UTC time as ISO-8601 with seconds.
std::string utc_timestamp();

}  // namespace calm::cli
