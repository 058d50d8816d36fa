// Slow, independent reference implementations used only by the tests.
#pragma once

#include "digitfrac/digit_system.hpp"
#include "digitfrac/rational.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using digitfrac::BigInt;
using digitfrac::Digit;
using digitfrac::DigitSystem;
using digitfrac::Rational;
using digitfrac::RationalVector;

inline bool has_digit(const DigitSystem& sys, const Digit& d) {
  return std::find(sys.digits.begin(), sys.digits.end(), d) != sys.digits.end();
}

// Membership by long division: for every choice of expansion per coordinate
// (greedy, or the one ending in (b-1)s), generate joint digits and remember
// each remainder tuple; a repeat closes the period.
inline bool member(const DigitSystem& sys, const RationalVector& x) {
  const std::size_t k = x.size();
  for (unsigned mode = 0; mode < (1u << k); ++mode) {
    std::vector<Rational> r = x;
    std::set<std::vector<Rational>> seen;
    bool ok = true;
    while (ok) {
      if (!seen.insert(r).second) break;
      Digit d(k);
      for (std::size_t j = 0; j < k; ++j) {
        Rational v = r[j] * sys.base;
        BigInt f = v.get_num() / v.get_den();  // floor for non-negative v
        if ((mode >> j) & 1u) {
          if (Rational(f) == v) f -= 1;  // ceil(v) - 1
        }
        if (f < 0 || f >= sys.base) {
          ok = false;
          break;
        }
        d[j] = static_cast<int>(f.get_si());
        r[j] = v - Rational(f);
      }
      if (ok && !has_digit(sys, d)) ok = false;
    }
    if (ok) return true;
  }
  return false;
}

// Closed depth-m cylinders (corner numerators over b^m) with their weights.
struct Cylinder {
  std::vector<std::int64_t> corner;
  Rational weight;
};

inline std::vector<Cylinder> cylinders(const DigitSystem& sys, int depth) {
  std::vector<Cylinder> cur{{std::vector<std::int64_t>(static_cast<std::size_t>(sys.dim), 0), Rational(1)}};
  for (int level = 0; level < depth; ++level) {
    std::vector<Cylinder> next;
    next.reserve(cur.size() * sys.digits.size());
    for (const auto& c : cur) {
      for (std::size_t i = 0; i < sys.digits.size(); ++i) {
        Cylinder child{c.corner, c.weight * sys.weights[i]};
        for (int j = 0; j < sys.dim; ++j) child.corner[j] = child.corner[j] * sys.base + sys.digits[i][j];
        next.push_back(std::move(child));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// Sandwich for mu(box) from the depth-m cover: cylinders inside the box give
// a lower bound, cylinders meeting the closed box an upper bound.
inline std::pair<Rational, Rational> cover_bracket(const DigitSystem& sys, const RationalVector& lo,
                                                   const RationalVector& hi, const std::vector<bool>& closed_lo,
                                                   const std::vector<bool>& closed_hi, int depth) {
  Rational scale = 1;
  for (int i = 0; i < depth; ++i) scale *= sys.base;
  Rational lower = 0, upper = 0;
  for (const auto& c : cylinders(sys, depth)) {
    bool inside = true, meets = true;
    for (int j = 0; j < sys.dim; ++j) {
      Rational a = Rational(c.corner[j]) / scale;
      Rational b = a + Rational(1) / scale;
      bool in_lo = closed_lo[j] ? a >= lo[j] : a > lo[j];
      bool in_hi = closed_hi[j] ? b <= hi[j] : b < hi[j];
      inside = inside && in_lo && in_hi;
      meets = meets && b >= lo[j] && a <= hi[j];
    }
    if (inside) lower += c.weight;
    if (meets) upper += c.weight;
  }
  return {lower, upper};
}

// Exact distance from x to a one-dimensional missing-digit set, by locating
// the gap of K containing x through its digits.
inline Rational dist_1d(const DigitSystem& sys, const Rational& x) {
  int dmin = sys.base, dmax = -1;
  for (const auto& d : sys.digits) {
    dmin = std::min(dmin, d[0]);
    dmax = std::max(dmax, d[0]);
  }
  const Rational kmin = Rational(dmin) / (sys.base - 1);
  const Rational kmax = Rational(dmax) / (sys.base - 1);
  if (x <= kmin) return kmin - x;
  if (x >= kmax) return x - kmax;
  // Best K points below and above x found so far.
  Rational below = kmin, above = kmax;
  Rational corner = 0, scale = 1, rest = x;
  std::set<Rational> seen;
  for (;;) {
    if (!seen.insert(rest).second) return 0;  // periodic with admissible digits
    Rational v = rest * sys.base;
    BigInt f = v.get_num() / v.get_den();
    int d = static_cast<int>(f.get_si());
    if (d == sys.base) d = sys.base - 1;  // only when rest == 1
    for (const auto& e : sys.digits) {
      Rational lo_pt = corner + scale * (Rational(e[0]) + kmin) / sys.base;
      Rational hi_pt = corner + scale * (Rational(e[0]) + kmax) / sys.base;
      if (hi_pt <= x && hi_pt > below) below = hi_pt;
      if (lo_pt >= x && lo_pt < above) above = lo_pt;
    }
    if (below == x || above == x) return 0;
    if (!has_digit(sys, Digit{d})) break;
    corner += scale * d / sys.base;
    scale /= sys.base;
    rest = v - Rational(d);
  }
  return std::min(x - below, above - x);
}

// mu^(xi) by explicit cylinder quadrature at depth 5 * blocks: each block of
// five digits is enumerated explicitly with exact integer phases, and the
// block sums multiply because digits are independent.
inline std::complex<long double> quadrature(const DigitSystem& sys, const std::vector<std::int64_t>& xi,
                                            int blocks) {
  const int per = 5;
  std::complex<long double> total = 1;
  __int128 outer = 1;  // b^(5 * block)
  __int128 inner = 1;  // b^5
  for (int i = 0; i < per; ++i) inner *= sys.base;
  const auto cyl = cylinders(sys, per);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  for (int blk = 0; blk < blocks; ++blk) {
    const __int128 den = outer * inner;
    std::complex<long double> block = 0;
    for (const auto& c : cyl) {
      __int128 phase = 0;
      for (int j = 0; j < sys.dim; ++j) phase += static_cast<__int128>(xi[j]) * c.corner[j];
      phase %= den;
      if (phase < 0) phase += den;
      long double t = -two_pi * static_cast<long double>(phase) / static_cast<long double>(den);
      block += static_cast<long double>(c.weight.get_d()) * std::complex<long double>(std::cos(t), std::sin(t));
    }
    total *= block;
    outer = den;
  }
  return total;
}

// sup over [0, 1/3) of (1/3) sum_i |cos 2 pi (x + i/3)|, the averaged sum for
// the middle-third Cantor measure at level 1, by brute force.
inline double cantor_level1_sup(double step) {
  double best = 0;
  const double two_pi = 2.0 * std::numbers::pi;
  const long n = static_cast<long>(std::ceil((1.0 / 3.0) / step));
  for (long i = 0; i <= n; ++i) {
    double x = i * step;
    double s = 0;
    for (int j = 0; j < 3; ++j) s += std::fabs(std::cos(two_pi * (x + j / 3.0)));
    best = std::max(best, s / 3.0);
  }
  return best;
}

}  // namespace oracle

namespace oracle {

// N_K(Q, delta) for product systems by direct enumeration: for each q every
// numerator a in [-2q, 3q] gets its exact distance per coordinate, and the
// sup-distance condition factorises over coordinates.
class NaiveCounter {
 public:
  explicit NaiveCounter(std::vector<DigitSystem> factors) : factors_(std::move(factors)) {}

  std::int64_t count(std::int64_t Q, const Rational& r) {
    std::int64_t total = 0;
    for (std::int64_t q = 1; q <= Q; ++q) {
      std::int64_t prod = 1;
      for (std::size_t j = 0; j < factors_.size(); ++j) {
        const auto& d = distances(j, q);
        prod *= static_cast<std::int64_t>(std::upper_bound(d.begin(), d.end(), r) - d.begin());
      }
      total += prod;
    }
    return total;
  }

 private:
  const std::vector<Rational>& distances(std::size_t j, std::int64_t q) {
    auto key = std::make_pair(j, q);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<Rational> d;
    for (std::int64_t a = -2 * q; a <= 3 * q; ++a) {
      d.push_back(dist_1d(factors_[j], digitfrac::make_rational(a, q)));
    }
    std::sort(d.begin(), d.end());
    return cache_.emplace(key, std::move(d)).first->second;
  }

  std::vector<DigitSystem> factors_;
  std::map<std::pair<std::size_t, std::int64_t>, std::vector<Rational>> cache_;
};

// Rational points a/q on K with q <= Q, by testing every fraction.
inline std::int64_t count_on_brute(const DigitSystem& sys1d, std::int64_t Q) {
  std::int64_t total = 0;
  for (std::int64_t q = 1; q <= Q; ++q)
    for (std::int64_t a = 0; a <= q; ++a)
      if (member(sys1d, {digitfrac::make_rational(a, q)})) ++total;
  return total;
}

}  // namespace oracle
