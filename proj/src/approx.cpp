#include "digitfrac/approx.hpp"

#include "digitfrac/error.hpp"
#include "digitfrac/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>

namespace digitfrac {

namespace {

const Rational& clip_below_one() {
  static const Rational v = Rational(1) - make_rational(1, 1000000000);
  return v;
}

const Rational& clip_below_half() {
  static const Rational v = make_rational(1, 2) - make_rational(1, 1000000000);
  return v;
}

void check_params(const ApproxFunction& f) {
  if (f.params.size() != 1) throw Error(ErrorCode::BadFamilyParams, "psi families take one parameter");
  const double p = f.params[0];
  switch (f.family) {
    case PsiFamily::PowerT:
      if (!(p >= 0) || !std::isfinite(p)) throw Error(ErrorCode::BadFamilyParams, "t must be >= 0");
      break;
    case PsiFamily::PowerLogSim:
    case PsiFamily::PowerLogMult:
      if (!(p >= 1) || p != std::floor(p)) {
        throw Error(ErrorCode::BadFamilyParams, "k must be a positive integer");
      }
      break;
    case PsiFamily::Constant:
      if (!(p >= 0 && p < 1)) throw Error(ErrorCode::BadFamilyParams, "constant must lie in [0, 1)");
      break;
  }
}

// psi clipped for the measure sums, or PsiTooLarge.
Rational psi_for_sums(const ApproxFunction& f, std::int64_t n, const SumOptions& options) {
  Rational v = psi_exact(f, n);
  if (v >= make_rational(1, 2)) {
    if (!options.clip) {
      throw Error(ErrorCode::PsiTooLarge, "psi(" + std::to_string(n) + ") >= 1/2");
    }
    v = clip_below_half();
  }
  return v;
}

RationalVector reduce_mod1(const RationalVector& y) {
  RationalVector out = y;
  for (auto& v : out) v -= Rational(floor_of(v));
  return out;
}

// Nearest-integer distance ||v||.
Rational dist_to_int(const Rational& v) {
  Rational f = v - Rational(floor_of(v));
  Rational g = Rational(1) - f;
  return f < g ? f : g;
}

// A union of disjoint intervals in [0,1].
struct Interval {
  Rational lo, hi;
  bool cl = false, ch = false;
};
using CoordUnion = std::vector<Interval>;

enum class Inner { None, Strict, Loose };

// {x in [0,1] : inner (<|<=) ||n x - y|| < outer}. An outer radius above 1/2
// is vacuous.
CoordUnion window_union(std::int64_t n, const Rational& y, Inner inner_kind, const Rational& inner,
                        const Rational& outer) {
  CoordUnion pieces;
  if (outer <= 0) return pieces;
  Rational U = outer;
  bool outer_closed = false;
  if (U > make_rational(1, 2)) {
    U = make_rational(1, 2);
    outer_closed = true;
  }
  if (inner_kind != Inner::None && inner >= U) {
    if (!(inner == U && inner_kind == Inner::Loose && outer_closed)) return pieces;
  }
  const Rational nn = n;
  auto add = [&](Rational lo, Rational hi, bool cl, bool ch) {
    if (lo < 0) {
      lo = 0;
      cl = true;
    }
    if (hi > 1) {
      hi = 1;
      ch = true;
    }
    if (lo > hi || (lo == hi && !(cl && ch))) return;
    pieces.push_back({lo, hi, cl, ch});
  };
  for (std::int64_t a = -1; a <= n; ++a) {
    const Rational c = (Rational(a) + y) / nn;
    const Rational u = U / nn;
    if (inner_kind == Inner::None) {
      add(c - u, c + u, outer_closed, outer_closed);
    } else {
      const Rational w = inner / nn;
      const bool inner_closed = inner_kind == Inner::Loose;
      add(c - u, c - w, outer_closed, inner_closed);
      add(c + w, c + u, inner_closed, outer_closed);
    }
  }
  std::sort(pieces.begin(), pieces.end(), [](const Interval& a, const Interval& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    return a.cl && !b.cl;
  });
  CoordUnion merged;
  for (auto& p : pieces) {
    if (!merged.empty()) {
      Interval& last = merged.back();
      if (p.lo < last.hi || (p.lo == last.hi && (last.ch || p.cl))) {
        if (p.hi > last.hi) {
          last.hi = p.hi;
          last.ch = p.ch;
        } else if (p.hi == last.hi) {
          last.ch = last.ch || p.ch;
        }
        continue;
      }
    }
    merged.push_back(p);
  }
  return merged;
}

struct Bracket {
  Rational lo = 0, hi = 0;
  bool exact = true;
};

Bracket add(Bracket a, const Bracket& b) {
  a.lo += b.lo;
  a.hi += b.hi;
  a.exact = a.exact && b.exact;
  return a;
}

Bracket mul(Bracket a, const Bracket& b) {
  a.lo *= b.lo;
  a.hi *= b.hi;
  a.exact = a.exact && b.exact;
  return a;
}

Bracket one_dim_measure(const DigitSystem& factor, const CoordUnion& u, const BoxMeasureOptions& mo) {
  Bracket total;
  for (const auto& iv : u) {
    Box box;
    box.lo = {iv.lo};
    box.hi = {iv.hi};
    box.closed_lo = {iv.cl};
    box.closed_hi = {iv.ch};
    MeasureBracket m = box_measure(factor, box, mo);
    total = add(total, Bracket{m.lower, m.upper, m.exact});
  }
  return total;
}

// mu of the product set prod_j U_j.
class ProductMeasure {
 public:
  ProductMeasure(const DigitSystem& sys, const BoxMeasureOptions& mo) : sys_(sys), mo_(mo) {
    if (sys.dim > 1) factors_ = coordinate_factors(sys);
  }

  Bracket operator()(const std::vector<CoordUnion>& unions) const {
    for (const auto& u : unions) {
      if (u.empty()) return Bracket{};
    }
    if (sys_.dim == 1) return one_dim_measure(sys_, unions[0], mo_);
    if (factors_) {
      Bracket total{1, 1, true};
      for (std::size_t j = 0; j < unions.size(); ++j) {
        total = mul(total, one_dim_measure((*factors_)[j], unions[j], mo_));
      }
      return total;
    }
    Bracket total;
    std::vector<std::size_t> idx(unions.size(), 0);
    Box box;
    box.lo.resize(unions.size());
    box.hi.resize(unions.size());
    box.closed_lo.resize(unions.size());
    box.closed_hi.resize(unions.size());
    for (;;) {
      for (std::size_t j = 0; j < unions.size(); ++j) {
        const Interval& iv = unions[j][idx[j]];
        box.lo[j] = iv.lo;
        box.hi[j] = iv.hi;
        box.closed_lo[j] = iv.cl;
        box.closed_hi[j] = iv.ch;
      }
      MeasureBracket m = box_measure(sys_, box, mo_);
      total = add(total, Bracket{m.lower, m.upper, m.exact});
      std::size_t j = 0;
      while (j < idx.size() && ++idx[j] == unions[j].size()) idx[j++] = 0;
      if (j == idx.size()) break;
    }
    return total;
  }

  // Measure of one coordinate union under the j-th marginal, when the
  // system factors.
  std::optional<Bracket> marginal(std::size_t j, const CoordUnion& u) const {
    if (sys_.dim == 1) return one_dim_measure(sys_, u, mo_);
    if (!factors_) return std::nullopt;
    return one_dim_measure((*factors_)[j], u, mo_);
  }

 private:
  const DigitSystem& sys_;
  BoxMeasureOptions mo_;
  std::optional<std::vector<DigitSystem>> factors_;
};

MeasureSeries assemble(std::vector<std::int64_t> ns, const std::vector<Bracket>& terms) {
  MeasureSeries s;
  s.n = std::move(ns);
  Rational lo = 0, hi = 0;
  for (const auto& t : terms) {
    lo += t.lo;
    hi += t.hi;
    s.term_lo.push_back(t.lo);
    s.term_hi.push_back(t.hi);
    s.partial_lo.push_back(lo);
    s.partial_hi.push_back(hi);
    s.exact = s.exact && t.exact;
  }
  return s;
}

std::vector<std::int64_t> range_of(std::int64_t first, std::int64_t N) {
  std::vector<std::int64_t> ns;
  for (std::int64_t n = first; n <= N; ++n) ns.push_back(n);
  return ns;
}

void check_first(const SumOptions& options) {
  if (options.first_n < 1) throw Error(ErrorCode::InvalidArgument, "first_n must be at least 1");
}

RationalVector check_shift(const DigitSystem& sys, const RationalVector& y) {
  if (y.empty()) return RationalVector(static_cast<std::size_t>(sys.dim), Rational(0));
  if (static_cast<int>(y.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "shift dimension differs from system dimension");
  }
  return reduce_mod1(y);
}

// Dyadic index range for level m: h_i = 2^-i with
// psi(2^(m-1))/2^(m-1) <= h_i <= 1/2^(m-1).
std::vector<int> h_indices(const Rational& psi_prev, int m) {
  std::vector<int> out;
  if (psi_prev <= 0) return out;
  int i = m - 1;
  out.push_back(i);
  // 2^(i+1-(m-1)) psi_prev <= 1  <=>  h_{i+1} >= psi_prev / 2^(m-1)
  Rational scaled = psi_prev * 2;
  while (scaled <= 1) {
    ++i;
    out.push_back(i);
    scaled *= 2;
    if (out.size() > 4096) throw Error(ErrorCode::BudgetExceeded, "too many dyadic shapes");
  }
  return out;
}

Rational h_of(int i) {
  Rational r = 1;
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(i));
  r.canonicalize();
  return r;
}

Rational pow2(int e) {
  Rational r = 1;
  if (e >= 0) {
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<mp_bitcnt_t>(e));
  } else {
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-e));
  }
  r.canonicalize();
  return r;
}

int level_of(std::int64_t n) {
  int m = 0;
  while ((std::int64_t{1} << m) <= n) ++m;
  return m;  // n in [2^(m-1), 2^m)
}

}  // namespace

ApproxFunction ApproxFunction::power_t(double t) {
  ApproxFunction f;
  f.family = PsiFamily::PowerT;
  f.params = {t};
  check_params(f);
  return f;
}

ApproxFunction ApproxFunction::power_log_sim(int k) {
  ApproxFunction f;
  f.family = PsiFamily::PowerLogSim;
  f.params = {static_cast<double>(k)};
  check_params(f);
  return f;
}

ApproxFunction ApproxFunction::power_log_mult(int k) {
  ApproxFunction f;
  f.family = PsiFamily::PowerLogMult;
  f.params = {static_cast<double>(k)};
  check_params(f);
  return f;
}

ApproxFunction ApproxFunction::constant(const Rational& c) {
  ApproxFunction f;
  f.family = PsiFamily::Constant;
  f.params = {to_double(c)};
  f.exact_constant = c;
  if (c < 0 || c >= 1) throw Error(ErrorCode::BadFamilyParams, "constant must lie in [0, 1)");
  return f;
}

ApproxFunction ApproxFunction::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::BadFamilyParams, "psi must look like family:parameter, got '" + text + "'");
  }
  const std::string name = text.substr(0, colon);
  Rational value;
  try {
    value = parse_rational(text.substr(colon + 1));
  } catch (const Error&) {
    throw Error(ErrorCode::BadFamilyParams, "bad psi parameter in '" + text + "'");
  }
  if (name == "power_t") return power_t(to_double(value));
  if (name == "power_log_sim" || name == "power_log_mult") {
    if (value.get_den() != 1 || value < 1) {
      throw Error(ErrorCode::BadFamilyParams, "k must be a positive integer");
    }
    int k = static_cast<int>(value.get_num().get_si());
    return name == "power_log_sim" ? power_log_sim(k) : power_log_mult(k);
  }
  if (name == "constant") return constant(value);
  throw Error(ErrorCode::BadFamilyParams, "unknown psi family '" + name + "'");
}

std::string ApproxFunction::to_string() const {
  std::ostringstream out;
  switch (family) {
    case PsiFamily::PowerT:
      out << "power_t:" << params[0];
      break;
    case PsiFamily::PowerLogSim:
      out << "power_log_sim:" << params[0];
      break;
    case PsiFamily::PowerLogMult:
      out << "power_log_mult:" << params[0];
      break;
    case PsiFamily::Constant:
      if (exact_constant >= 0) {
        out << "constant:" << digitfrac::to_string(exact_constant);
      } else {
        out << "constant:" << params[0];
      }
      break;
  }
  return out.str();
}

double psi_eval(const ApproxFunction& f, std::int64_t n) {
  check_params(f);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "psi is defined for n >= 1");
  const double p = f.params[0];
  const double x = static_cast<double>(n);
  double v = 0;
  switch (f.family) {
    case PsiFamily::PowerT:
      v = std::pow(x, -p);
      break;
    case PsiFamily::PowerLogSim: {
      double l = std::log(x);
      v = n == 1 ? 1.0 : std::pow(x * l * l, -1.0 / p);
      break;
    }
    case PsiFamily::PowerLogMult: {
      double l = std::log(x);
      v = n == 1 ? 1.0 : 1.0 / (x * std::pow(l, p + 1.0));
      break;
    }
    case PsiFamily::Constant:
      v = p;
      break;
  }
  return std::min(v, 1.0 - 1e-9);
}

Rational psi_exact(const ApproxFunction& f, std::int64_t n) {
  check_params(f);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "psi is defined for n >= 1");
  Rational v;
  if (f.family == PsiFamily::Constant) {
    v = f.exact_constant >= 0 ? f.exact_constant : rational_from_double(f.params[0]);
  } else if (f.family == PsiFamily::PowerT && f.params[0] == std::floor(f.params[0]) && f.params[0] <= 64) {
    v = Rational(1) / pow_rational(Rational(n), static_cast<unsigned>(f.params[0]));
  } else {
    return rational_from_double(psi_eval(f, n));
  }
  if (v > clip_below_one()) v = clip_below_one();
  return v;
}

ApproxMode parse_mode(const std::string& name) {
  if (name == "sim") return ApproxMode::Sim;
  if (name == "mult") return ApproxMode::Mult;
  throw Error(ErrorCode::InvalidArgument, "mode must be sim or mult");
}

std::vector<HitRecord> hits(const RationalVector& x, const RationalVector& y, const ApproxFunction& f,
                            std::int64_t N0, std::int64_t N1, ApproxMode mode) {
  if (N0 < 1 || N0 > N1) throw Error(ErrorCode::InvalidArgument, "need 1 <= N0 <= N1");
  RationalVector shift = y.empty() ? RationalVector(x.size(), Rational(0)) : y;
  if (shift.size() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "shift dimension differs from point dimension");
  }
  shift = reduce_mod1(shift);
  std::vector<HitRecord> out;
  for (std::int64_t n = N0; n <= N1; ++n) {
    const Rational psi = psi_exact(f, n);
    if (psi == 0) continue;
    Rational value = mode == ApproxMode::Sim ? Rational(0) : Rational(1);
    HitRecord rec;
    rec.n = n;
    for (std::size_t j = 0; j < x.size(); ++j) {
      Rational v = x[j] * n - shift[j];
      BigInt a = floor_of(v + make_rational(1, 2));
      rec.witnesses.push_back(to_int64(a));
      Rational u = dist_to_int(v);
      if (mode == ApproxMode::Sim) {
        if (u > value) value = u;
      } else {
        value *= u;
      }
    }
    if (value < psi) {
      rec.value = to_double(value);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

MeasureSeries khinchin_sum_mu(const DigitSystem& sys, const ApproxFunction& f, const RationalVector& y,
                              std::int64_t N, const SumOptions& options) {
  validate(sys);
  check_first(options);
  const RationalVector shift = check_shift(sys, y);
  const auto ns = range_of(options.first_n, N);
  std::vector<Rational> psis;
  for (auto n : ns) psis.push_back(psi_for_sums(f, n, options));
  const ProductMeasure measure(sys, options.measure);
  std::vector<Bracket> terms(ns.size());
  parallel_for(ns.size(), resolve_threads(options.threads), [&](std::size_t i) {
    const std::int64_t n = ns[i];
    std::vector<CoordUnion> unions;
    for (int j = 0; j < sys.dim; ++j) unions.push_back(window_union(n, shift[j], Inner::None, 0, psis[i]));
    terms[i] = measure(unions);
  });
  return assemble(ns, terms);
}

std::vector<Rational> khinchin_sum_lebesgue(const ApproxFunction& f, int k, std::int64_t N,
                                            const SumOptions& options) {
  check_first(options);
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  std::vector<Rational> out;
  Rational total = 0;
  for (std::int64_t n = options.first_n; n <= N; ++n) {
    total += pow_rational(psi_for_sums(f, n, options) * 2, static_cast<unsigned>(k));
    out.push_back(total);
  }
  return out;
}

Sandwich dyadic_sandwich(const ApproxFunction& f, int m, int k, const SumOptions& options) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "m must be at least 1");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (m > 62) throw Error(ErrorCode::BudgetExceeded, "m must be at most 62");
  const Rational psi_next = psi_for_sums(f, std::int64_t{1} << m, options);
  const Rational psi_prev = psi_for_sums(f, std::int64_t{1} << (m - 1), options);
  Sandwich s;
  s.lower.m = s.upper.m = m;
  s.lower.shells = true;
  const auto idx = h_indices(psi_prev, m);
  if (idx.empty()) return s;
  const Rational lower_target = psi_next / pow2(k * m);
  const Rational upper_target = psi_prev / pow2(k * (m - 1));
  std::vector<std::size_t> pick(static_cast<std::size_t>(k - 1), 0);
  for (;;) {
    RationalVector sides;
    Rational prod = 1;
    for (auto p : pick) {
      sides.push_back(h_of(idx[p]));
      prod *= sides.back();
    }
    if (lower_target > 0) {
      RationalVector lo = sides;
      lo.push_back(lower_target / prod);
      s.lower.shapes.push_back({lo});
    }
    RationalVector up = sides;
    up.push_back(upper_target / prod * pow2(k - 1));
    s.upper.shapes.push_back({up});
    std::size_t j = 0;
    while (j < pick.size() && ++pick[j] == idx.size()) pick[j++] = 0;
    if (j == pick.size()) break;
  }
  return s;
}

bool in_lower(const Sandwich& s, std::int64_t n, const RationalVector& x, const RationalVector& y) {
  const RationalVector shift = y.empty() ? RationalVector(x.size(), Rational(0)) : reduce_mod1(y);
  RationalVector u;
  for (std::size_t j = 0; j < x.size(); ++j) u.push_back(dist_to_int(x[j] * n - shift[j]));
  for (const auto& shape : s.lower.shapes) {
    bool inside = true;
    for (std::size_t j = 0; j < x.size() && inside; ++j) {
      const Rational w = shape.sides[j] * n;
      inside = w / 2 < u[j] && u[j] < w;
    }
    if (inside) return true;
  }
  return false;
}

bool in_upper(const Sandwich& s, std::int64_t n, const RationalVector& x, const RationalVector& y) {
  const RationalVector shift = y.empty() ? RationalVector(x.size(), Rational(0)) : reduce_mod1(y);
  RationalVector u;
  for (std::size_t j = 0; j < x.size(); ++j) u.push_back(dist_to_int(x[j] * n - shift[j]));
  for (const auto& shape : s.upper.shapes) {
    bool inside = true;
    for (std::size_t j = 0; j < x.size() && inside; ++j) inside = u[j] < shape.sides[j] * n;
    if (inside) return true;
  }
  return false;
}

bool in_mult(const ApproxFunction& f, std::int64_t n, const RationalVector& x, const RationalVector& y,
             const SumOptions& options) {
  const RationalVector shift = y.empty() ? RationalVector(x.size(), Rational(0)) : reduce_mod1(y);
  Rational prod = 1;
  for (std::size_t j = 0; j < x.size(); ++j) prod *= dist_to_int(x[j] * n - shift[j]);
  return prod < psi_for_sums(f, n, options);
}

GallagherSeries gallagher_sum_mu(const DigitSystem& sys, const ApproxFunction& f, const RationalVector& y,
                                 std::int64_t N, const SumOptions& options) {
  validate(sys);
  check_first(options);
  if (sys.dim == 1) {
    // One coordinate: the multiplicative set is A_n itself.
    GallagherSeries g;
    g.lower = khinchin_sum_mu(sys, f, y, N, options);
    g.upper = g.lower;
    return g;
  }
  const RationalVector shift = check_shift(sys, y);
  const int k = sys.dim;
  const auto ns = range_of(options.first_n, N);
  const ProductMeasure measure(sys, options.measure);

  std::vector<Bracket> lower(ns.size()), upper(ns.size());
  parallel_for(ns.size(), resolve_threads(options.threads), [&](std::size_t t) {
    const std::int64_t n = ns[t];
    const int m = level_of(n);
    const Rational nn = n;
    const Rational psi_next = psi_for_sums(f, std::int64_t{1} << m, options);
    const Rational psi_prev = psi_for_sums(f, std::int64_t{1} << (m - 1), options);
    const auto idx = h_indices(psi_prev, m);
    if (idx.empty()) return;

    // Shell of index i in coordinate j: n h_i / 2 < u < n h_i (lower), and the
    // partition cells for the upper family: innermost u < n h_imax, then
    // n h_{l+1} <= u < n h_l.
    const std::size_t P = idx.size();
    std::vector<std::vector<CoordUnion>> shell(static_cast<std::size_t>(k - 1)),
        cell(static_cast<std::size_t>(k - 1));
    for (int j = 0; j + 1 < k; ++j) {
      for (std::size_t p = 0; p < P; ++p) {
        const Rational w = h_of(idx[p]) * nn;
        shell[j].push_back(window_union(n, shift[j], Inner::Strict, w / 2, w));
        if (p + 1 == P) {
          cell[j].push_back(window_union(n, shift[j], Inner::None, 0, w));
        } else {
          cell[j].push_back(window_union(n, shift[j], Inner::Loose, h_of(idx[p + 1]) * nn, w));
        }
      }
    }
    const Rational lower_target = psi_next / pow2(k * m);
    const Rational upper_target = psi_prev / pow2(k * (m - 1));

    // Marginal measures are cached when the system factors.
    std::vector<std::vector<std::optional<Bracket>>> shell_mu(static_cast<std::size_t>(k - 1)),
        cell_mu(static_cast<std::size_t>(k - 1));
    for (int j = 0; j + 1 < k; ++j) {
      for (std::size_t p = 0; p < P; ++p) {
        shell_mu[j].push_back(measure.marginal(static_cast<std::size_t>(j), shell[j][p]));
        cell_mu[j].push_back(measure.marginal(static_cast<std::size_t>(j), cell[j][p]));
      }
    }

    Bracket lo_total, hi_total;
    std::vector<std::size_t> pick(static_cast<std::size_t>(k - 1), 0);
    for (;;) {
      Rational prod = 1;
      for (int j = 0; j + 1 < k; ++j) prod *= h_of(idx[pick[j]]);
      const Rational h = lower_target / prod;
      const Rational H = upper_target / prod * pow2(k - 1);
      const CoordUnion last_shell = window_union(n, shift[k - 1], Inner::Strict, h * nn / 2, h * nn);
      const CoordUnion last_box = window_union(n, shift[k - 1], Inner::None, 0, H * nn);
      std::optional<Bracket> last_shell_mu = measure.marginal(static_cast<std::size_t>(k - 1), last_shell);
      if (last_shell_mu) {
        Bracket a{1, 1, true}, b{1, 1, true};
        for (int j = 0; j + 1 < k; ++j) {
          a = mul(a, *shell_mu[j][pick[j]]);
          b = mul(b, *cell_mu[j][pick[j]]);
        }
        lo_total = add(lo_total, mul(a, *last_shell_mu));
        hi_total = add(hi_total, mul(b, *measure.marginal(static_cast<std::size_t>(k - 1), last_box)));
      } else {
        std::vector<CoordUnion> a, b;
        for (int j = 0; j + 1 < k; ++j) {
          a.push_back(shell[j][pick[j]]);
          b.push_back(cell[j][pick[j]]);
        }
        a.push_back(last_shell);
        b.push_back(last_box);
        lo_total = add(lo_total, measure(a));
        hi_total = add(hi_total, measure(b));
      }
      std::size_t j = 0;
      while (j < pick.size() && ++pick[j] == P) pick[j++] = 0;
      if (j == pick.size()) break;
    }
    lower[t] = lo_total;
    upper[t] = hi_total;
  });
  GallagherSeries g;
  g.lower = assemble(ns, lower);
  g.upper = assemble(ns, upper);
  return g;
}

LimsupEstimate limsup_fraction(const DigitSystem& sys, const ApproxFunction& f, const RationalVector& y,
                               std::int64_t N0, std::int64_t N1, std::int64_t samples,
                               std::uint64_t seed, ApproxMode mode, int threads) {
  validate(sys);
  if (N0 < 1 || N0 > N1) throw Error(ErrorCode::InvalidArgument, "need 1 <= N0 <= N1");
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be positive");
  const RationalVector shift = check_shift(sys, y);
  const int k = sys.dim;
  using i128 = __int128;

  LimsupEstimate est;
  est.N0 = N0;
  est.N1 = N1;
  est.samples = samples;

  std::vector<long double> psi;
  bool any = false;
  for (std::int64_t n = N0; n <= N1; ++n) {
    psi.push_back(psi_eval(f, n));
    any = any || psi.back() > 0;
  }
  // Enough digits that the truncation error b^-D n is far below psi(n).
  const double lb = std::log(static_cast<double>(sys.base));
  const double tail = psi.back() > 0 ? std::log(static_cast<double>(N1) / static_cast<double>(psi.back())) / lb : 0;
  const int depth = static_cast<int>(
      std::ceil(std::max(2.0 * std::log(static_cast<double>(N1)) / lb, tail + 8.0)));
  est.depth = depth;

  std::vector<i128> yq(static_cast<std::size_t>(k)), yp(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    if (!fits_int64(shift[j].get_den())) throw Error(ErrorCode::BudgetExceeded, "shift denominator too large");
    yq[j] = to_int64(shift[j].get_den());
    yp[j] = to_int64(shift[j].get_num());
  }
  i128 B = 1;
  for (int i = 0; i < depth; ++i) {
    B *= sys.base;
    for (int j = 0; j < k; ++j) {
      if (B > (static_cast<i128>(1) << 124) / (yq[j] * 2 * N1)) {
        throw Error(ErrorCode::BudgetExceeded, "sample depth too large for exact residues");
      }
    }
  }
  if (!any) {
    est.ci_hi = 0;
    return est;
  }

  const detail::DigitSampler sampler(sys);
  constexpr std::int64_t kChunk = 256;
  const std::int64_t chunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::int64_t> chunk_hits(static_cast<std::size_t>(chunks), 0);
  parallel_for(static_cast<std::size_t>(chunks), resolve_threads(threads), [&](std::size_t c) {
    std::vector<i128> X(static_cast<std::size_t>(k)), M(static_cast<std::size_t>(k)),
        step(static_cast<std::size_t>(k)), V(static_cast<std::size_t>(k));
    std::int64_t found = 0;
    const std::int64_t begin = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t end = std::min(samples, begin + kChunk);
    for (std::int64_t s = begin; s < end; ++s) {
      std::mt19937_64 rng(mix_seed(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(s)));
      std::fill(X.begin(), X.end(), 0);
      for (int i = 0; i < depth; ++i) {
        const Digit& d = sys.digits[sampler.draw(rng)];
        for (int j = 0; j < k; ++j) X[j] = X[j] * sys.base + d[j];
      }
      // n x_j - y_j = (n X q - p B) / (q B); V tracks the numerator mod q B.
      for (int j = 0; j < k; ++j) {
        M[j] = yq[j] * B;
        step[j] = (X[j] * yq[j]) % M[j];
        i128 v = (static_cast<i128>(N0) * X[j] * yq[j] - yp[j] * B) % M[j];
        if (v < 0) v += M[j];
        V[j] = v;
      }
      bool hit = false;
      for (std::size_t t = 0; t < psi.size() && !hit; ++t) {
        const long double p = psi[t];
        if (p > 0) {
          long double value = mode == ApproxMode::Sim ? 0.0L : 1.0L;
          for (int j = 0; j < k; ++j) {
            const i128 dist = std::min(V[j], M[j] - V[j]);
            const long double u = static_cast<long double>(dist) / static_cast<long double>(M[j]);
            value = mode == ApproxMode::Sim ? std::max(value, u) : value * u;
          }
          hit = value < p;
        }
        for (int j = 0; j < k; ++j) {
          V[j] += step[j];
          if (V[j] >= M[j]) V[j] -= M[j];
        }
      }
      if (hit) ++found;
    }
    chunk_hits[c] = found;
  });
  for (auto h : chunk_hits) est.hits += h;

  const double nS = static_cast<double>(samples);
  const double p = static_cast<double>(est.hits) / nS;
  est.fraction = p;
  est.sigma = std::sqrt(p * (1 - p) / nS);
  const double z = 1.959963984540054;
  const double denom = 1 + z * z / nS;
  const double centre = (p + z * z / (2 * nS)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nS + z * z / (4 * nS * nS)) / denom;
  est.ci_lo = std::max(0.0, centre - half);
  est.ci_hi = std::min(1.0, centre + half);
  return est;
}

std::vector<IntrinsicHit> intrinsic_hits(const DigitSystem& sys, const RationalVector& x, double tau,
                                         std::int64_t Q) {
  validate(sys);
  if (static_cast<int>(x.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension differs from system dimension");
  }
  for (const auto& v : x) {
    if (v < 0 || v > 1) throw Error(ErrorCode::OutOfUnitCube, "coordinate " + to_string(v));
  }
  if (!(tau >= 0)) throw Error(ErrorCode::InvalidArgument, "tau must be non-negative");
  const bool integer_tau = tau == std::floor(tau) && tau <= 64;
  // |n x - a| < n^-tau
  auto close = [&](const Rational& e, std::int64_t n) {
    if (e == 0) return true;
    if (n == 1) return e < 1;
    if (integer_tau) return e * pow_rational(Rational(n), static_cast<unsigned>(tau)) < 1;
    return std::log(to_double(e)) < -tau * std::log(static_cast<double>(n));
  };
  std::vector<IntrinsicHit> out;
  const std::size_t k = x.size();
  for (std::int64_t n = 1; n <= Q; ++n) {
    std::vector<std::vector<std::int64_t>> options(k);
    bool possible = true;
    for (std::size_t j = 0; j < k && possible; ++j) {
      const Rational v = x[j] * n;
      const BigInt lo = floor_of(v);
      for (BigInt a = lo; a <= lo + 1; ++a) {
        if (a < 0 || a > n) continue;
        Rational e = v - Rational(a);
        if (e < 0) e = -e;
        if (close(e, n)) options[j].push_back(to_int64(a));
      }
      possible = !options[j].empty();
    }
    if (!possible) continue;
    std::vector<std::size_t> idx(k, 0);
    for (;;) {
      RationalVector point;
      std::vector<std::int64_t> a;
      for (std::size_t j = 0; j < k; ++j) {
        a.push_back(options[j][idx[j]]);
        point.push_back(make_rational(a.back(), n));
      }
      if (contains_rational(sys, point)) out.push_back({a, n});
      std::size_t j = 0;
      while (j < k && ++idx[j] == options[j].size()) idx[j++] = 0;
      if (j == k) break;
    }
  }
  return out;
}

}  // namespace digitfrac
