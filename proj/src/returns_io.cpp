#include "tailport/returns_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tailport/error.hpp"

namespace tailport {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_iso_date(const std::string& s) {
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
  if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return false;
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse = [&](std::size_t pos, std::size_t len, auto& out) {
    const char* first = s.data() + pos;
    auto [p, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc{} && p == first + len;
  };
  if (!parse(0, 4, y) || !parse(5, 2, m) || !parse(8, 2, d)) return false;
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

double parse_value(const std::string& s, std::size_t line) {
  if (s.empty()) throw ParseError(line, "missing value");
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(line, "invalid number '" + s + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value '" + s + "'");
  return v;
}

}  // namespace

ReturnsSeries parse_returns_csv(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  ReturnsSeries out;
  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    if (!header) {
      if (raw.find(',') == std::string::npos) throw ParseError(line, "header must name two columns: date,value");
      header = true;
      continue;
    }
    const auto comma = raw.find(',');
    if (comma == std::string::npos) throw ParseError(line, "expected two comma-separated fields");
    if (raw.find(',', comma + 1) != std::string::npos) throw ParseError(line, "too many fields");
    std::string date = trim(std::string_view(raw).substr(0, comma));
    std::string value = trim(std::string_view(raw).substr(comma + 1));
    if (!valid_iso_date(date)) throw ParseError(line, "invalid ISO-8601 date '" + date + "'");
    if (!out.dates.empty() && !(out.dates.back() < date))
      throw ParseError(line, "dates must be strictly increasing ('" + date + "' after '" + out.dates.back() + "')");
    out.values.push_back(parse_value(value, line));
    out.dates.push_back(std::move(date));
  }
  if (!header) throw ParseError(line == 0 ? 1 : line, "empty file: header required");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed for " + path);
}

ReturnsSeries read_returns_csv(const std::string& path) { return parse_returns_csv(read_file(path)); }

std::string format_returns_csv(const ReturnsSeries& s) {
  std::string out = "date,value\n";
  char buf[40];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", s.values[i]);
    out += s.dates[i];
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

ReturnsSeries log_returns(const ReturnsSeries& prices) {
  if (prices.size() < 2) throw DataError("log returns need at least two prices");
  ReturnsSeries out;
  for (std::size_t t = 1; t < prices.size(); ++t) {
    if (!(prices.values[t] > 0.0) || !(prices.values[t - 1] > 0.0))
      throw DataError("log returns need positive prices (row " + std::to_string(t + 1) + ")");
    out.dates.push_back(prices.dates[t]);
    out.values.push_back(std::log(prices.values[t] / prices.values[t - 1]));
  }
  return out;
}

std::vector<std::string> synthetic_dates(std::size_t count, const std::string& first) {
  using namespace std::chrono;
  if (!valid_iso_date(first)) throw DomainError("invalid start date '" + first + "'");
  const year_month_day start{year{std::stoi(first.substr(0, 4))},
                             month{static_cast<unsigned>(std::stoi(first.substr(5, 2)))},
                             day{static_cast<unsigned>(std::stoi(first.substr(8, 2)))}};
  sys_days d{start};
  std::vector<std::string> out;
  out.reserve(count);
  char buf[16];
  for (std::size_t i = 0; i < count; ++i, d += days{1}) {
    const year_month_day ymd{d};
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    out.emplace_back(buf);
  }
  return out;
}

std::string fnv1a_hex(std::span<const char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tailport
