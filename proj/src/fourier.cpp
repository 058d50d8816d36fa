#include "digitfrac/fourier.hpp"

#include "digitfrac/error.hpp"
#include "digitfrac/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace digitfrac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxFactors = 200;

double frac(double v) { return v - std::floor(v); }

std::vector<double> weights_of(const DigitSystem& sys) {
  std::vector<double> w;
  for (const auto& p : sys.weights) w.push_back(p.get_d());
  return w;
}

double g_impl(const DigitSystem& sys, const std::vector<double>& w, std::span<const double> x) {
  double re = 0, im = 0;
  for (std::size_t i = 0; i < sys.digits.size(); ++i) {
    double phase = 0;
    for (int j = 0; j < sys.dim; ++j) phase += sys.digits[i][j] * frac(x[j]);
    phase = kTwoPi * frac(phase);
    re += w[i] * std::cos(phase);
    im += w[i] * std::sin(phase);
  }
  return std::min(1.0, std::hypot(re, im));
}

// g at the point num/den (coordinatewise), phases reduced exactly.
double g_exact(const DigitSystem& sys, const std::vector<double>& w, const std::int64_t* num,
               std::int64_t den) {
  double re = 0, im = 0;
  for (std::size_t i = 0; i < sys.digits.size(); ++i) {
    __int128 s = 0;
    for (int j = 0; j < sys.dim; ++j) s += static_cast<__int128>(sys.digits[i][j]) * num[j];
    s %= den;
    double phase = kTwoPi * static_cast<double>(s) / static_cast<double>(den);
    re += w[i] * std::cos(phase);
    im += w[i] * std::sin(phase);
  }
  return std::min(1.0, std::hypot(re, im));
}

__int128 ipow128(int base, int exp) {
  __int128 r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

nlohmann::json to_json(const L1BoundReport& r) {
  nlohmann::json j;
  j["level"] = r.level;
  j["grid_step"] = r.grid_step;
  j["grid_max"] = r.grid_max;
  j["lipschitz"] = r.lipschitz;
  j["certified_sup"] = r.certified_sup;
  j["bound"] = r.bound;
  j["grid_too_coarse"] = r.grid_too_coarse;
  j["grid_points"] = r.grid_points;
  return j;
}

double g_eval(const DigitSystem& sys, std::span<const double> x) {
  if (static_cast<int>(x.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension differs from system dimension");
  }
  return g_impl(sys, weights_of(sys), x);
}

double s_l_eval(const DigitSystem& sys, std::span<const double> x, int L) {
  if (L < 1) throw Error(ErrorCode::InvalidArgument, "L must be at least 1");
  if (static_cast<int>(x.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension differs from system dimension");
  }
  const auto w = weights_of(sys);
  std::vector<double> y(x.begin(), x.end());
  for (auto& v : y) v = frac(v);
  double prod = 1;
  for (int j = 0; j < L; ++j) {
    prod *= g_impl(sys, w, y);
    if (prod == 0) break;
    for (auto& v : y) v = frac(v * sys.base);
  }
  return prod;
}

CertifiedComplex mu_hat(const DigitSystem& sys, std::span<const std::int64_t> xi, double tol) {
  if (!(tol > 0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  if (static_cast<int>(xi.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "frequency dimension differs from system dimension");
  }
  CertifiedComplex out;
  std::int64_t norm = 0;
  for (auto v : xi) norm = std::max<std::int64_t>(norm, v < 0 ? -v : v);
  if (norm == 0) {
    out.value = 1.0;
    return out;
  }
  const auto w = weights_of(sys);
  const double nd = static_cast<double>(sys.digits.size());
  const double scale = kTwoPi * sys.dim * static_cast<double>(norm);

  int J = 1;
  double tail = scale / sys.base;
  auto roundoff = [&](int depth) { return 8.0 * kEps * depth * (nd + 4); };
  while (tail + roundoff(J) > tol) {
    ++J;
    tail /= sys.base;
    if (roundoff(J) > tol) {
      throw Error(ErrorCode::TolTooTight, "tolerance is below the floating-point roundoff of the product");
    }
    if (J > kMaxFactors) {
      throw Error(ErrorCode::TolTooTight, "mu_hat needs more than 200 factors for this tolerance");
    }
  }

  std::vector<__int128> dot(sys.digits.size());
  for (std::size_t i = 0; i < sys.digits.size(); ++i) {
    __int128 s = 0;
    for (int j = 0; j < sys.dim; ++j) s += static_cast<__int128>(sys.digits[i][j]) * xi[j];
    dot[i] = s;
  }
  // b^j is tracked exactly until it exceeds 2^100; past that point every
  // |d.xi| / b^j is already tiny and no reduction is needed.
  const __int128 limit = static_cast<__int128>(1) << 100;
  __int128 power = 1;
  bool exact_power = true;
  double power_d = 1;
  std::complex<double> prod = 1.0;
  for (int j = 1; j <= J; ++j) {
    if (exact_power && power > limit / sys.base) exact_power = false;
    if (exact_power) power *= sys.base;
    power_d *= sys.base;
    double re = 0, im = 0;
    for (std::size_t i = 0; i < dot.size(); ++i) {
      double phase;
      if (exact_power) {
        __int128 r = dot[i] % power;
        if (r < 0) r += power;
        phase = static_cast<double>(r) / static_cast<double>(power);
      } else {
        phase = static_cast<double>(dot[i]) / power_d;
      }
      phase *= kTwoPi;
      re += w[i] * std::cos(phase);
      im -= w[i] * std::sin(phase);
    }
    prod *= std::complex<double>(re, im);
  }
  out.value = prod;
  out.err = tail + roundoff(J);
  out.depth = J;
  return out;
}

CertifiedValue l1_partial_sum(const DigitSystem& sys, int Q, double tol_per_term,
                              const L1SumOptions& options) {
  if (Q < 0) throw Error(ErrorCode::InvalidArgument, "Q must be non-negative");
  validate(sys);
  const std::uint64_t side = 2 * static_cast<std::uint64_t>(Q) + 1;
  std::uint64_t terms = 1;
  for (int j = 0; j < sys.dim; ++j) {
    if (terms > options.max_terms / side) {
      throw Error(ErrorCode::BudgetExceeded, "lattice box exceeds the term budget");
    }
    terms *= side;
  }
  // One chunk per value of the first coordinate; chunk sums are added in
  // index order.
  std::vector<double> sums(side, 0.0), errs(side, 0.0);
  const std::uint64_t inner = terms / side;
  parallel_for(side, resolve_threads(options.threads), [&](std::size_t c) {
    std::vector<std::int64_t> xi(static_cast<std::size_t>(sys.dim));
    double s = 0, e = 0;
    for (std::uint64_t t = 0; t < inner; ++t) {
      xi[0] = static_cast<std::int64_t>(c) - Q;
      std::uint64_t rest = t;
      for (int j = 1; j < sys.dim; ++j) {
        xi[j] = static_cast<std::int64_t>(rest % side) - Q;
        rest /= side;
      }
      CertifiedComplex v = mu_hat(sys, xi, tol_per_term);
      s += std::abs(v.value);
      e += v.err;
    }
    sums[c] = s;
    errs[c] = e;
  });
  CertifiedValue out;
  for (std::size_t c = 0; c < side; ++c) {
    out.value += sums[c];
    out.err += errs[c];
  }
  out.err += 2.0 * kEps * static_cast<double>(terms) * std::max(1.0, out.value);
  return out;
}

L1BoundReport l1_lower_bound(const DigitSystem& sys, int L, double grid_step, int threads) {
  if (L < 1) throw Error(ErrorCode::InvalidArgument, "L must be at least 1");
  if (!(grid_step > 0)) throw Error(ErrorCode::InvalidArgument, "grid step must be positive");
  validate(sys);
  const int k = sys.dim;
  const int b = sys.base;

  const double period_d = std::pow(static_cast<double>(b), L);
  const double cells_d = std::pow(period_d, k);
  if (cells_d > 1e8) throw Error(ErrorCode::BudgetExceeded, "b^(kL) exceeds 1e8");
  const auto period = static_cast<std::int64_t>(ipow128(b, L));

  // Points per coordinate in one period, rounded up so the spacing divides
  // the period.
  const double n_d = std::ceil(1.0 / (period_d * grid_step) - 1e-9);
  const double grid_d = std::pow(n_d, k);
  if (n_d > 1e9 || grid_d * cells_d > 2e12) {
    throw Error(ErrorCode::BudgetExceeded, "grid too fine for the configured budget");
  }
  const auto n = static_cast<std::int64_t>(std::max(1.0, n_d));
  const std::int64_t den = period * n;

  std::uint64_t grid_points = 1;
  for (int j = 0; j < k; ++j) grid_points *= static_cast<std::uint64_t>(n);

  const auto w = weights_of(sys);
  // powers[j] = b^j; residue tables for level j live on [0, b^{L-j})^k.
  std::vector<std::int64_t> powers(static_cast<std::size_t>(L) + 1, 1);
  for (int j = 1; j <= L; ++j) powers[j] = powers[j - 1] * b;
  std::vector<std::int64_t> table_size(static_cast<std::size_t>(L));
  for (int j = 0; j < L; ++j) {
    std::int64_t s = 1;
    for (int c = 0; c < k; ++c) s *= powers[L - j];
    table_size[j] = s;
  }
  std::int64_t bk = 1;
  for (int c = 0; c < k; ++c) bk *= b;

  auto evaluate = [&](const std::vector<std::int64_t>& point, std::vector<std::vector<double>>& W) {
    std::vector<std::int64_t> arg(static_cast<std::size_t>(k));
    std::vector<std::int64_t> r(static_cast<std::size_t>(k));
    for (int j = 0; j < L; ++j) {
      const std::int64_t radix = powers[L - j];
      auto& table = W[j];
      for (std::int64_t idx = 0; idx < table_size[j]; ++idx) {
        std::int64_t rest = idx;
        for (int c = 0; c < k; ++c) {
          r[c] = rest % radix;
          rest /= radix;
          // b^j (x + r / b^{L-j}) with x = point / den, as a numerator over den.
          __int128 v = static_cast<__int128>(powers[j]) * (point[c] + r[c] * n * powers[j]);
          arg[c] = static_cast<std::int64_t>(v % den);
        }
        table[idx] = g_exact(sys, w, arg.data(), den);
      }
    }
    // Fold levels from the finest residue table down: W_{j+1}[r] *= sum over
    // the top base-b digit of W_j.
    for (int j = 0; j + 1 < L; ++j) {
      const std::int64_t radix = powers[L - j];
      const std::int64_t child_radix = powers[L - j - 1];
      auto& next = W[j + 1];
      const auto& cur = W[j];
      for (std::int64_t idx = 0; idx < table_size[j + 1]; ++idx) {
        std::int64_t rest = idx;
        std::vector<std::int64_t> base_r(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
          base_r[c] = rest % child_radix;
          rest /= child_radix;
        }
        double acc = 0;
        for (std::int64_t t = 0; t < bk; ++t) {
          std::int64_t trest = t;
          std::int64_t flat = 0, mult = 1;
          for (int c = 0; c < k; ++c) {
            std::int64_t digit = trest % b;
            trest /= b;
            flat += (base_r[c] + digit * child_radix) * mult;
            mult *= radix;
          }
          acc += cur[flat];
        }
        next[idx] *= acc;
      }
    }
    double total = 0;
    for (double v : W[L - 1]) total += v;
    return total / cells_d;
  };

  // Chunks over the first coordinate of the grid; each chunk keeps its own max.
  std::vector<double> chunk_max(static_cast<std::size_t>(n), 0.0);
  const std::uint64_t inner = grid_points / static_cast<std::uint64_t>(n);
  parallel_for(static_cast<std::size_t>(n), resolve_threads(threads), [&](std::size_t c0) {
    std::vector<std::vector<double>> W(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j) W[j].assign(static_cast<std::size_t>(table_size[j]), 0.0);
    std::vector<std::int64_t> point(static_cast<std::size_t>(k));
    double best = 0;
    for (std::uint64_t t = 0; t < inner; ++t) {
      point[0] = static_cast<std::int64_t>(c0);
      std::uint64_t rest = t;
      for (int c = 1; c < k; ++c) {
        point[c] = static_cast<std::int64_t>(rest % static_cast<std::uint64_t>(n));
        rest /= static_cast<std::uint64_t>(n);
      }
      best = std::max(best, evaluate(point, W));
    }
    chunk_max[c0] = best;
  });

  L1BoundReport rep;
  rep.level = L;
  rep.grid_step = 1.0 / static_cast<double>(den);
  rep.grid_points = grid_points;
  rep.grid_max = *std::max_element(chunk_max.begin(), chunk_max.end());
  rep.lipschitz = kTwoPi * k * (period_d - 1.0);
  const double roundoff = 64.0 * kEps * (L + 1) * (static_cast<double>(sys.size()) + 4);
  double sup = rep.grid_max + rep.lipschitz * rep.grid_step / 2.0 + roundoff;
  if (sup >= 1.0) {
    sup = 1.0;
    rep.grid_too_coarse = true;
  }
  rep.certified_sup = sup;
  rep.bound = -std::log(sup) / std::log(period_d);
  if (rep.bound == 0.0) rep.bound = 0.0;  // avoid -0
  return rep;
}

bool check_assumption(double kappa, int k, Assumption which) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const double kk = k;
  switch (which) {
    case Assumption::Main:
      return kappa > kk - (kk - 1.0) / (kk + 1.0);
    case Assumption::Weak:
      return kappa > kk - kk / (kk + 1.0);
    case Assumption::Split:
      return kappa > 1.0 - 1.0 / (kk + 1.0);
  }
  return false;
}

Assumption parse_assumption(const std::string& name) {
  if (name == "main") return Assumption::Main;
  if (name == "weak") return Assumption::Weak;
  if (name == "split") return Assumption::Split;
  throw Error(ErrorCode::InvalidArgument, "unknown assumption '" + name + "'");
}

double jb_exponent(double t, int k) {
  if (t < 0) throw Error(ErrorCode::InvalidArgument, "t must be non-negative");
  return std::min((k + 1.0) / (t + 1.0), static_cast<double>(k));
}

}  // namespace digitfrac
