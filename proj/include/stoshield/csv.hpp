#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>

namespace stoshield {

/// Round-trip safe scientific notation (17 significant digits).
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

/// Comma-joined row writer; values are either strings or reals.
class CsvRow {
 public:
  explicit CsvRow(std::ostream& os) : os_(os) {}
  ~CsvRow() { os_ << '\n'; }
  CsvRow(const CsvRow&) = delete;
  CsvRow& operator=(const CsvRow&) = delete;

  CsvRow& operator<<(double x) { return put(format_real(x)); }
  CsvRow& operator<<(const std::string& s) { return put(s); }
  CsvRow& operator<<(const char* s) { return put(s); }
  template <typename I>
    requires std::is_integral_v<I>
  CsvRow& operator<<(I i) { return put(std::to_string(i)); }

 private:
  CsvRow& put(const std::string& s) {
    if (!first_) os_ << ',';
    first_ = false;
    os_ << s;
    return *this;
  }
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace stoshield
