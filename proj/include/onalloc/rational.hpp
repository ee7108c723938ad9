#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace onalloc {

using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double to_double(const Rat& v) { return v.convert_to<double>(); }

inline double as_double(double v) { return v; }
inline double as_double(const Rat& v) { return to_double(v); }

/// Exact rational value of a finite double (every finite double is a
/// dyadic rational).
inline Rat rat_from_double(double d) {
  if (!std::isfinite(d)) throw ParseError("non-finite number");
  if (d == 0.0) return Rat(0);
  int exp = 0;
  const double mant = std::frexp(d, &exp);      // d = mant * 2^exp, |mant| in [0.5, 1)
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  BigInt num(scaled);
  const int shift = exp - 53;
  if (shift >= 0) return Rat(num << shift);
  return Rat(num, BigInt(1) << (-shift));
}

template <class Num>
Num num_cast(const Rat& v);

template <>
inline Rat num_cast<Rat>(const Rat& v) { return v; }

template <>
inline double num_cast<double>(const Rat& v) { return to_double(v); }

inline Rat rat_cast(const Rat& v) { return v; }
inline Rat rat_cast(double v) { return rat_from_double(v); }

namespace detail {

inline BigInt pow10_big(unsigned n) {
  BigInt r = 1;
  for (unsigned i = 0; i < n; ++i) r *= 10;
  return r;
}

inline BigInt parse_int_digits(std::string_view s, std::string_view whole) {
  if (s.empty()) throw ParseError("malformed number: \"" + std::string(whole) + "\"");
  BigInt v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw ParseError("malformed number: \"" + std::string(whole) + "\"");
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace detail

/// Parses "p/q" fractions and decimal literals (with optional exponent)
/// exactly, with no floating-point round trip.
inline Rat parse_rational(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) throw ParseError("empty number");

  bool neg = false;
  if (s.front() == '+' || s.front() == '-') {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }

  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    const BigInt num = detail::parse_int_digits(s.substr(0, slash), text);
    const BigInt den = detail::parse_int_digits(s.substr(slash + 1), text);
    if (den == 0) throw ParseError("zero denominator: \"" + std::string(text) + "\"");
    Rat r(num, den);
    return neg ? Rat(-r) : r;
  }

  std::string_view mantissa = s;
  long exponent = 0;
  if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    mantissa = s.substr(0, e);
    std::string_view es = s.substr(e + 1);
    bool eneg = false;
    if (!es.empty() && (es.front() == '+' || es.front() == '-')) {
      eneg = es.front() == '-';
      es.remove_prefix(1);
    }
    const BigInt ev = detail::parse_int_digits(es, text);
    if (ev > 4096) throw ParseError("exponent out of range: \"" + std::string(text) + "\"");
    exponent = ev.convert_to<long>();
    if (eneg) exponent = -exponent;
  }

  std::string_view ip = mantissa, fp{};
  if (auto dot = mantissa.find('.'); dot != std::string_view::npos) {
    ip = mantissa.substr(0, dot);
    fp = mantissa.substr(dot + 1);
  }
  if (ip.empty() && fp.empty()) throw ParseError("malformed number: \"" + std::string(text) + "\"");

  BigInt digits = 0;
  for (std::string_view part : {ip, fp})
    for (char c : part) {
      if (c < '0' || c > '9') throw ParseError("malformed number: \"" + std::string(text) + "\"");
      digits = digits * 10 + (c - '0');
    }

  Rat r(digits, detail::pow10_big(static_cast<unsigned>(fp.size())));
  if (exponent > 0)
    r *= Rat(detail::pow10_big(static_cast<unsigned>(exponent)));
  else if (exponent < 0)
    r /= Rat(detail::pow10_big(static_cast<unsigned>(-exponent)));
  return neg ? Rat(-r) : r;
}

/// Shortest decimal form of a double that round-trips, re-parsed exactly.
/// "0.1" as a JSON number becomes exactly 1/10, not the binary approximation.
inline Rat rat_from_double_shortest(double d) {
  if (!std::isfinite(d)) throw ParseError("non-finite number");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), d);
  return parse_rational(std::string_view(buf, static_cast<size_t>(res.ptr - buf)));
}

/// Canonical form: "p" for integers, "p/q" otherwise.
inline std::string rat_to_string(const Rat& v) {
  const BigInt num = boost::multiprecision::numerator(v);
  const BigInt den = boost::multiprecision::denominator(v);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

inline Rat pow2_rat(int s) {
  if (s >= 0) return Rat(BigInt(1) << s);
  return Rat(1, BigInt(1) << (-s));
}

/// floor(log2(b/w)) for rationals with b >= w > 0, by exact comparison
/// against powers of two.
inline int floor_log2_ratio(const Rat& b, const Rat& w) {
  if (w <= 0 || b < w) throw std::invalid_argument("floor_log2_ratio requires b >= w > 0");
  int s = 0;
  Rat scaled = w * 2;
  while (scaled <= b) {
    ++s;
    scaled *= 2;
  }
  return s;
}

}  // namespace onalloc
