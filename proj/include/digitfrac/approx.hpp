#pragma once

#include "digitfrac/digit_system.hpp"
#include "digitfrac/measure.hpp"
#include "digitfrac/rational.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace digitfrac {

enum class PsiFamily { PowerT, PowerLogSim, PowerLogMult, Constant };

// Approximating function psi(n).
//   power_t        n^-t                     params {t}
//   power_log_sim  (n (log n)^2)^(-1/k)     params {k}
//   power_log_mult (n (log n)^(k+1))^(-1)   params {k}
//   constant       c                        params {c}
struct ApproxFunction {
  PsiFamily family = PsiFamily::PowerT;
  std::vector<double> params;
  // Exact value of the constant, when it was given as a rational literal.
  Rational exact_constant = -1;

  static ApproxFunction power_t(double t);
  static ApproxFunction power_log_sim(int k);
  static ApproxFunction power_log_mult(int k);
  static ApproxFunction constant(const Rational& c);
  // "power_t:2", "power_log_sim:1", "power_log_mult:2", "constant:3/10".
  static ApproxFunction parse(const std::string& text);
  std::string to_string() const;
};

// Values at n = 1 (and wherever the family exceeds it) are clipped to 1 - 1e-9.
double psi_eval(const ApproxFunction& f, std::int64_t n);

// psi(n) as a rational: exact for integer powers and rational constants,
// otherwise the exact value of the double returned by psi_eval.
Rational psi_exact(const ApproxFunction& f, std::int64_t n);

enum class ApproxMode { Sim, Mult };
ApproxMode parse_mode(const std::string& name);

struct HitRecord {
  std::int64_t n = 0;
  std::vector<std::int64_t> witnesses;  // a_j nearest to n x_j - y_j
  double value = 0;                     // max or product of the distances
};

// Every n in [N0, N1] with max_j ||n x_j - y_j|| < psi(n) (Sim) or
// prod_j ||n x_j - y_j|| < psi(n) (Mult). Comparisons are exact.
std::vector<HitRecord> hits(const RationalVector& x, const RationalVector& y, const ApproxFunction& f,
                            std::int64_t N0, std::int64_t N1, ApproxMode mode);

struct SumOptions {
  // First n of the series; n = 1 is allowed and is clipped like every other n.
  std::int64_t first_n = 2;
  // Clip psi to 1/2 - 1e-9. Without clipping psi >= 1/2 raises PsiTooLarge.
  bool clip = true;
  int threads = 1;
  BoxMeasureOptions measure;
};

// Per-n terms and running sums; lower == upper unless a box measure had to
// fall back to bracketing.
struct MeasureSeries {
  std::vector<std::int64_t> n;
  std::vector<Rational> term_lo, term_hi;
  std::vector<Rational> partial_lo, partial_hi;
  bool exact = true;
};

// mu(A_n) for A_n = {x in [0,1]^k : ||n x_j - y_j|| < psi(n) for all j}.
MeasureSeries khinchin_sum_mu(const DigitSystem& sys, const ApproxFunction& f, const RationalVector& y,
                              std::int64_t N, const SumOptions& options = {});

// Running sums of (2 psi(n))^k from first_n to N, same clipping as above.
std::vector<Rational> khinchin_sum_lebesgue(const ApproxFunction& f, int k, std::int64_t N,
                                            const SumOptions& options = {});

// One rectangle shape: half-widths d_1..d_k (the box is ||n x_j - y_j|| < n d_j).
struct RectShape {
  RationalVector sides;
};

struct RectFamily {
  int m = 0;  // n ranges over D_m = [2^(m-1), 2^m)
  std::vector<RectShape> shapes;
  bool shells = false;  // lower family uses n d_j / 2 < ||.|| < n d_j
};

struct Sandwich {
  RectFamily lower;
  RectFamily upper;
};

// Dyadic families with  B_n subset A_n^x subset C_n  for n in D_m, where
// h_i = 2^-i for 2^-i in [psi(2^(m-1))/2^(m-1), 1/2^(m-1)]; lower shapes are
// (h_i..., h) with h prod h_i = psi(2^m)/2^(km), upper shapes
// (h_i..., 2^(k-1) H) with H prod h_i = psi(2^(m-1))/2^(k(m-1)).
Sandwich dyadic_sandwich(const ApproxFunction& f, int m, int k, const SumOptions& options = {});

// Pointwise membership, exact.
bool in_lower(const Sandwich& s, std::int64_t n, const RationalVector& x, const RationalVector& y);
bool in_upper(const Sandwich& s, std::int64_t n, const RationalVector& x, const RationalVector& y);
bool in_mult(const ApproxFunction& f, std::int64_t n, const RationalVector& x, const RationalVector& y,
             const SumOptions& options = {});

struct GallagherSeries {
  MeasureSeries lower;  // mu(B_n)
  MeasureSeries upper;  // mu(C_n)
};

GallagherSeries gallagher_sum_mu(const DigitSystem& sys, const ApproxFunction& f, const RationalVector& y,
                                 std::int64_t N, const SumOptions& options = {});

struct LimsupEstimate {
  std::int64_t N0 = 0;
  std::int64_t N1 = 0;
  std::int64_t samples = 0;
  std::int64_t hits = 0;
  double fraction = 0;
  double sigma = 0;   // binomial standard error
  double ci_lo = 0;   // Wilson 95% interval
  double ci_hi = 0;
  int depth = 0;      // digits per sampled point
};

// Fraction of mu-random points with at least one n in [N0, N1] hitting.
// Deterministic in seed; independent of the thread count.
LimsupEstimate limsup_fraction(const DigitSystem& sys, const ApproxFunction& f, const RationalVector& y,
                               std::int64_t N0, std::int64_t N1, std::int64_t samples,
                               std::uint64_t seed, ApproxMode mode, int threads = 1);

struct IntrinsicHit {
  std::vector<std::int64_t> a;
  std::int64_t n = 0;
};

// (a, n) with n <= Q, a/n in K and max_j |x_j - a_j/n| < n^(-1-tau).
std::vector<IntrinsicHit> intrinsic_hits(const DigitSystem& sys, const RationalVector& x, double tau,
                                         std::int64_t Q);

}  // namespace digitfrac
