#pragma once

#include "digitfrac/digit_system.hpp"

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <span>

namespace digitfrac {

struct CertifiedValue {
  double value = 0;
  double err = 0;  // |true - value| <= err
};

struct CertifiedComplex {
  std::complex<double> value;
  double err = 0;
  int depth = 0;  // number of product factors used
};

struct L1BoundReport {
  int level = 0;
  double grid_step = 0;   // actual spacing used, divides 1/b^L
  double grid_max = 0;    // largest averaged sum seen on the grid
  double lipschitz = 0;   // l-infinity Lipschitz constant of the averaged sum
  double certified_sup = 0;
  double bound = 0;
  bool grid_too_coarse = false;  // certified_sup hit 1, bound is vacuous
  std::uint64_t grid_points = 0;
};

nlohmann::json to_json(const L1BoundReport& r);

// g(x) = |sum_d P(d) e(d.x)|.
double g_eval(const DigitSystem& sys, std::span<const double> x);

// S_L(x) = prod_{j<L} g(b^j x).
double s_l_eval(const DigitSystem& sys, std::span<const double> x, int L);

// Fourier coefficient mu^(xi) = int e(-xi.x) dmu from the infinite product
// prod_{j>=1} sum_d P(d) e(-d.xi / b^j). Phases are reduced exactly in integer
// arithmetic before conversion to floating point.
CertifiedComplex mu_hat(const DigitSystem& sys, std::span<const std::int64_t> xi, double tol);

struct L1SumOptions {
  int threads = 1;
  std::uint64_t max_terms = 50'000'000;
};

// sum_{|xi|_inf <= Q} |mu^(xi)|.
CertifiedValue l1_partial_sum(const DigitSystem& sys, int Q, double tol_per_term,
                              const L1SumOptions& options = {});

// Certified lower bound for the Fourier l1 dimension from the averaged sum
// F(x) = b^{-kL} sum_{i in {0..b^L-1}^k} S_L(x + i/b^L), which is
// 1/b^L-periodic. The sup of F over one period is bounded above by the grid
// maximum plus Lipschitz slack.
L1BoundReport l1_lower_bound(const DigitSystem& sys, int L, double grid_step, int threads = 1);

enum class Assumption { Main, Weak, Split };

bool check_assumption(double kappa, int k, Assumption which);
Assumption parse_assumption(const std::string& name);

// min{(k+1)/(t+1), k}
double jb_exponent(double t, int k);

}  // namespace digitfrac
