#include "digitfrac/rational.hpp"

#include "digitfrac/error.hpp"

#include <cctype>
#include <cmath>
#include <limits>

namespace digitfrac {

Rational make_rational(long long num, long long den) {
  if (den == 0) {
    throw Error(ErrorCode::InvalidArgument, "rational with zero denominator");
  }
  Rational r(BigInt(static_cast<long>(num)), BigInt(static_cast<long>(den)));
  r.canonicalize();
  return r;
}

Rational rational_from_double(double x) {
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::InvalidArgument, "cannot convert non-finite double to rational");
  }
  Rational r;
  mpq_set_d(r.get_mpq_t(), x);
  return r;
}

namespace {

BigInt pow10(unsigned e) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, e);
  return r;
}

Rational parse_decimal(const std::string& s) {
  std::size_t i = 0;
  bool negative = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    negative = s[i] == '-';
    ++i;
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_point = false;
  bool any_digit = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      any_digit = true;
      if (seen_point) ++frac_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw Error(ErrorCode::ParseError, "not a number: '" + s + "'");
  long exponent = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    std::size_t used = 0;
    try {
      exponent = std::stol(s.substr(i), &used);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad exponent in '" + s + "'");
    }
    i += used;
  }
  if (i != s.size()) throw Error(ErrorCode::ParseError, "trailing characters in '" + s + "'");
  Rational r{BigInt(digits, 10)};
  long shift = exponent - frac_digits;
  if (shift > 0) {
    r *= Rational(pow10(static_cast<unsigned>(shift)));
  } else if (shift < 0) {
    r /= Rational(pow10(static_cast<unsigned>(-shift)));
  }
  r.canonicalize();
  return negative ? Rational(-r) : r;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::string s = trim(text);
  auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  Rational num = parse_decimal(trim(s.substr(0, slash)));
  Rational den = parse_decimal(trim(s.substr(slash + 1)));
  if (den == 0) throw Error(ErrorCode::ParseError, "zero denominator in '" + s + "'");
  Rational r = num / den;
  r.canonicalize();
  return r;
}

double to_double(const Rational& x) { return x.get_d(); }

std::string to_string(const Rational& x) { return x.get_str(); }

bool fits_int64(const BigInt& x) {
  static_assert(sizeof(long) == sizeof(std::int64_t));
  return mpz_fits_slong_p(x.get_mpz_t()) != 0;
}

std::int64_t to_int64(const BigInt& x) {
  if (!fits_int64(x)) throw Error(ErrorCode::BudgetExceeded, "integer does not fit in 64 bits");
  return static_cast<std::int64_t>(mpz_get_si(x.get_mpz_t()));
}

BigInt floor_of(const Rational& x) {
  BigInt r;
  mpz_fdiv_q(r.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return r;
}

BigInt ceil_of(const Rational& x) {
  BigInt r;
  mpz_cdiv_q(r.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return r;
}

Rational pow_rational(const Rational& base, unsigned exponent) {
  BigInt num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), exponent);
  mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), exponent);
  Rational r(num, den);
  r.canonicalize();
  return r;
}

}  // namespace digitfrac
