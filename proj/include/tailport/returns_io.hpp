#pragma once

// CSV ingestion and emission of dated return series.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tailport {

struct ReturnsSeries {
  std::vector<std::string> dates;  // ISO-8601 (YYYY-MM-DD, optional time suffix)
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// Parses `date,value` rows after a mandatory header. Dates must be valid and strictly
/// increasing; empty or non-numeric values are rejected with the offending line number.
ReturnsSeries parse_returns_csv(const std::string& text);
ReturnsSeries read_returns_csv(const std::string& path);

/// Header `date,value`, values at 17 significant digits so that parsing is lossless.
std::string format_returns_csv(const ReturnsSeries& series);

/// ln(P_t / P_{t-1}); the first date is dropped.
ReturnsSeries log_returns(const ReturnsSeries& prices);

/// Consecutive calendar dates starting at `first` (YYYY-MM-DD).
std::vector<std::string> synthetic_dates(std::size_t count, const std::string& first = "2000-01-03");

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// 64-bit FNV-1a digest, as 16 hex digits.
std::string fnv1a_hex(std::span<const char> bytes);

}  // namespace tailport
