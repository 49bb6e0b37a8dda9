#include "hjm3/common.hpp"

#include <charconv>
#include <cstdio>

namespace hjm3 {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Date parse_date(std::string_view s) {
  s = trim(s);
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw ValidationError("bad date '" + std::string(s) + "'");
  auto p1 = std::from_chars(s.data(), s.data() + 4, y);
  auto p2 = std::from_chars(s.data() + 5, s.data() + 7, m);
  auto p3 = std::from_chars(s.data() + 8, s.data() + 10, d);
  if (p1.ec != std::errc{} || p2.ec != std::errc{} || p3.ec != std::errc{} || p1.ptr != s.data() + 4 ||
      p2.ptr != s.data() + 7 || p3.ptr != s.data() + 10)
    throw ValidationError("bad date '" + std::string(s) + "'");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ValidationError("bad date '" + std::string(s) + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

int iso_weekday(Date d) {
  std::chrono::weekday wd{d};
  return int(wd.iso_encoding()) - 1;
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ValidationError("cannot parse number '" + std::string(s) + "' (" + std::string(what) + ")");
  return v;
}

std::string fmt_double(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::string(trim(cur)));
  return out;
}

}  // namespace hjm3
