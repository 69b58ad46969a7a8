#pragma once

#include <string>
#include <vector>

namespace mimik {

/// 17 significant digits, '.' decimal separator (round-trips a double).
std::string format_double(double v);

/// Write via a temp file in the same directory, then rename into place.
void atomic_write(const std::string& path, const std::string& content);

/// RFC-4180-style CSV with LF line endings: one header row, numeric cells
/// formatted by format_double.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace mimik
