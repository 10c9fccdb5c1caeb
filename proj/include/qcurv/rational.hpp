#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace qcurv {

struct RationalOverflow : std::runtime_error {
  RationalOverflow() : std::runtime_error("rational arithmetic overflow") {}
};

// Exact rational with 64-bit numerator and denominator, always reduced,
// denominator > 0.  Intermediates use 128-bit integers; a result that does
// not fit back into 64 bits throws RationalOverflow so callers can fall
// back to floating point instead of silently losing exactness.
class Rational {
 public:
  Rational() : num_(0), den_(1) {}
  Rational(long long v) : num_(v), den_(1) {}  // NOLINT: implicit by design
  Rational(long long num, long long den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    init(static_cast<__int128>(num), static_cast<__int128>(den));
  }

  long long num() const { return num_; }
  long long den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_integer() const { return den_ == 1; }
  bool is_negative() const { return num_ < 0; }

  double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  std::string to_string() const {
    std::string s = std::to_string(num_);
    if (den_ != 1) s += "/" + std::to_string(den_);
    return s;
  }

  Rational operator-() const {
    Rational r;
    r.num_ = checked_neg(num_);
    r.den_ = den_;
    return r;
  }

  Rational abs() const { return num_ < 0 ? -*this : *this; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.den_ + i128(b.num_) * a.den_,
                i128(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.den_ - i128(b.num_) * a.den_,
                i128(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return make(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
  }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

  // k >= 0 only; exponentiation by squaring so intermediates stay checked.
  Rational pow(long long k) const {
    if (k < 0) throw std::invalid_argument("rational pow with negative exponent");
    Rational acc(1), base = *this;
    while (k > 0) {
      if (k & 1) acc *= base;
      base = (k >>= 1) ? base * base : base;
    }
    return acc;
  }

  static std::optional<Rational> try_add(const Rational& a, const Rational& b) {
    try { return a + b; } catch (const RationalOverflow&) { return std::nullopt; }
  }
  static std::optional<Rational> try_mul(const Rational& a, const Rational& b) {
    try { return a * b; } catch (const RationalOverflow&) { return std::nullopt; }
  }
  static std::optional<Rational> try_div(const Rational& a, const Rational& b) {
    if (b.is_zero()) return std::nullopt;
    try { return a / b; } catch (const RationalOverflow&) { return std::nullopt; }
  }
  static std::optional<Rational> try_pow(const Rational& a, long long k) {
    if (k < 0) return std::nullopt;
    try { return a.pow(k); } catch (const RationalOverflow&) { return std::nullopt; }
  }

 private:
  using i128 = __int128;
  using u128 = unsigned __int128;

  static u128 u128_abs(i128 v) { return v < 0 ? u128(-(v + 1)) + 1 : u128(v); }

  static u128 gcd_u128(u128 a, u128 b) {
    while (b != 0) {
      u128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static long long checked_neg(long long v) {
    if (v == INT64_MIN) throw RationalOverflow();
    return -v;
  }

  static Rational make(i128 num, i128 den) {
    Rational r;
    r.init(num, den);
    return r;
  }

  void init(i128 num, i128 den) {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    if (num == 0) {
      num_ = 0;
      den_ = 1;
      return;
    }
    u128 g = gcd_u128(u128_abs(num), u128(den));
    num /= i128(g);
    den /= i128(g);
    if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX) throw RationalOverflow();
    num_ = static_cast<long long>(num);
    den_ = static_cast<long long>(den);
  }

  long long num_;
  long long den_;
};

}  // namespace qcurv
