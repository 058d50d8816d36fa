#pragma once

#include "digitfrac/digit_system.hpp"
#include "digitfrac/rational.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace digitfrac {

// delta as a function of Q: either a fixed rational, or c * Q^(-e).
struct DeltaSpec {
  Rational constant = 0;
  Rational exponent = 0;  // e in c * Q^(-e); zero for a literal
  bool scaled = false;

  static DeltaSpec literal(Rational value);
  static DeltaSpec power(Rational c, Rational e);
  // "0", "1/3", "0.25", "Q^{-1/2}", "Q^-0.5", "2*Q^{-1}", "3Q^(-1/2)".
  static DeltaSpec parse(const std::string& text);

  // Exact when c * Q^(-e) is rational; otherwise rounded to the nearest
  // multiple of 2^-32.
  Rational resolve(std::int64_t Q) const;
  bool exact_at(std::int64_t Q) const;
  std::string to_string() const;
};

struct CountQuery {
  std::int64_t Q = 1;
  Rational delta = 0;
};

struct CountOptions {
  int threads = 1;
  // Work limit for one exact neighbourhood decision; exceeding it leaves the
  // point undecided and the result is reported as a bracket.
  std::uint64_t node_budget = 1'000'000;
};

struct CountResult {
  std::int64_t count = 0;  // equals count_lo when exact
  double heuristic = 0;    // delta^(k - kappa) Q^(kappa + 1)
  double ratio = 0;        // count / heuristic, NaN when delta = 0
  bool exact = true;
  std::int64_t count_lo = 0;
  std::int64_t count_hi = 0;
  std::vector<std::int64_t> per_q;  // per_q[q-1] = number of a for that q (lower count)
};

// Number of pairs (a, q), a in Z^k, 1 <= q <= Q, with dist_inf(a/q, K) <= delta/Q.
// Requires uniform weights.
CountResult count_near(const DigitSystem& sys, const CountQuery& query, const CountOptions& options = {});

// count_near with delta = 0: rational points a/q on K.
std::int64_t count_on(const DigitSystem& sys, std::int64_t Q, const CountOptions& options = {});

// All a in Z^k with dist_inf(a/q, K) <= r, sorted. Intended for small
// inspections; throws BudgetExceeded when a decision runs out of budget.
std::vector<std::vector<std::int64_t>> near_points(const DigitSystem& sys, std::int64_t q,
                                                   const Rational& r,
                                                   const CountOptions& options = {});

// Uniform system with digits {0..b-1}^(k-1) x {0..a-1}.
DigitSystem slab_system(int b, int a, int k);

// delta^(k - kappa) Q^(kappa + 1) with kappa = dim_H.
double count_heuristic(const DigitSystem& sys, std::int64_t Q, const Rational& delta);

// Exact test K intersect [lo, hi] != empty for a closed box. Returns 1, 0,
// or -1 when the node budget ran out.
int box_meets_fractal(const DigitSystem& sys, const RationalVector& lo, const RationalVector& hi,
                      std::uint64_t node_budget = 1'000'000);

}  // namespace digitfrac
