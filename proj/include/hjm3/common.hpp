#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hjm3 {

// Raised for bad inputs; the CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Date = std::chrono::sys_days;

Date parse_date(std::string_view s);
std::string format_date(Date d);
// 0 = Monday ... 6 = Sunday
int iso_weekday(Date d);

enum class Block { N, R, S };

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kBp = 1e-4;

inline bool is_missing(double x) { return std::isnan(x); }

// Parses a decimal number; throws ValidationError with `what` in the message on failure.
double parse_double(std::string_view s, std::string_view what);

// Shortest round-trip decimal representation.
std::string fmt_double(double x);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace hjm3
