#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "shallownet/errors.hpp"

namespace snet {

/// Shortest decimal string that parses back to the same double. Always
/// uses '.' regardless of locale.
std::string format_double(double v);

/// Locale-independent parse; throws FormatError on anything but a full
/// numeric token.
double parse_double(std::string_view s);

/// RFC-4180-style CSV with a header row and LF line ends. Cells
/// containing commas, quotes, or newlines are quoted. Throws FormatError
/// if any row's width differs from the header's.
std::string emit_table(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

/// Inverse of emit_table (quotes and CRLF accepted). Returns all rows
/// including the header.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace snet
