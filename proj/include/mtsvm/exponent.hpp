#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "mtsvm/errors.hpp"

namespace mtsvm {

// A norm exponent in [1, +inf]. +inf is a legitimate value here, carried as
// the IEEE infinity so that expressions like T^(1/p) come out exact; it is
// never approximated by a large finite float.
class Exponent {
 public:
  explicit Exponent(double v) : v_(v) {
    if (!(v >= 1.0)) {  // also rejects NaN
      throw InvalidExponent("exponent must lie in [1, +inf], got " +
                            std::to_string(v));
    }
  }

  static Exponent infinity() {
    return Exponent(std::numeric_limits<double>::infinity());
  }

  [[nodiscard]] double value() const { return v_; }
  [[nodiscard]] bool is_inf() const { return std::isinf(v_); }
  [[nodiscard]] bool is_one() const { return v_ == 1.0; }

  friend bool operator==(Exponent a, Exponent b) { return a.v_ == b.v_; }
  friend bool operator!=(Exponent a, Exponent b) { return a.v_ != b.v_; }
  friend bool operator<(Exponent a, Exponent b) { return a.v_ < b.v_; }
  friend bool operator<=(Exponent a, Exponent b) { return a.v_ <= b.v_; }
  friend bool operator>(Exponent a, Exponent b) { return a.v_ > b.v_; }
  friend bool operator>=(Exponent a, Exponent b) { return a.v_ >= b.v_; }

 private:
  double v_;
};

// Conjugate exponent: a* = a/(a-1), with 1* = +inf and (+inf)* = 1.
inline Exponent dual_exponent(Exponent a) {
  if (a.is_one()) return Exponent::infinity();
  if (a.is_inf()) return Exponent(1.0);
  return Exponent(a.value() / (a.value() - 1.0));
}

// "4", "1.5", "inf" -- used in CSV output and log lines.
inline std::string to_string(Exponent p) {
  if (p.is_inf()) return "inf";
  double v = p.value();
  if (v == static_cast<long long>(v)) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace mtsvm
