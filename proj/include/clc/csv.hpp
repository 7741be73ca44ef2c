#pragma once

// Minimal CSV writing: comma separator, header row, 17 significant digits,
// independent of the global locale.

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

namespace clc::csv {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // snprintf honours LC_NUMERIC; force '.' as the decimal mark.
  for (char& c : s)
    if (c == ',') c = '.';
  return s;
}

inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(unsigned long long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(unsigned v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(unsigned long v) { return std::to_string(v); }
inline std::string fmt(std::string_view v) { return std::string(v); }
inline std::string fmt(const char* v) { return std::string(v); }
inline std::string fmt(const std::string& v) { return v; }

template <class... Ts>
void row(std::ostream& os, const Ts&... fields) {
  bool first = true;
  ((os << (first ? "" : ",") << fmt(fields), first = false), ...);
  os << '\n';
}

}  // namespace clc::csv
