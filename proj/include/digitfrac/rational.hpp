#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <vector>

namespace digitfrac {

using Rational = mpq_class;
using BigInt = mpz_class;
using RationalVector = std::vector<Rational>;

Rational make_rational(long long num, long long den = 1);

// Every finite double is a dyadic rational; the conversion is exact.
Rational rational_from_double(double x);

// Accepts "p/q", integers, and decimal/scientific literals ("0.25", "1e-4").
// Decimal literals are converted exactly, so "0.1" is 1/10.
Rational parse_rational(const std::string& text);

double to_double(const Rational& x);
std::string to_string(const Rational& x);

bool fits_int64(const BigInt& x);
std::int64_t to_int64(const BigInt& x);

// floor(x) as a big integer.
BigInt floor_of(const Rational& x);
BigInt ceil_of(const Rational& x);

Rational pow_rational(const Rational& base, unsigned exponent);

}  // namespace digitfrac
