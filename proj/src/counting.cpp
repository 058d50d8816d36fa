#include "digitfrac/counting.hpp"

#include "digitfrac/error.hpp"
#include "digitfrac/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <unordered_map>

namespace digitfrac {

namespace {

using i128 = __int128;

struct VecHash {
  template <typename T>
  std::size_t operator()(const std::vector<T>& v) const {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (const auto& x : v) {
      auto u = static_cast<unsigned __int128>(x);
      h = mix_seed(h ^ static_cast<std::uint64_t>(u));
      h = mix_seed(h ^ static_cast<std::uint64_t>(u >> 64));
    }
    return static_cast<std::size_t>(h);
  }
};

i128 to_i128(const BigInt& v) {
  if (mpz_sizeinbase(v.get_mpz_t(), 2) > 120) {
    throw Error(ErrorCode::BudgetExceeded, "integer exceeds 120 bits");
  }
  BigInt hi = v >> 64;
  BigInt lo = v - (hi << 64);
  return (static_cast<i128>(hi.get_si()) << 64) + static_cast<i128>(lo.get_ui());
}

i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

i128 ceil_div(i128 a, i128 b) { return -floor_div(-a, b); }

constexpr i128 kMagnitudeLimit = static_cast<i128>(1) << 118;

void guard(i128 v) {
  if (v > kMagnitudeLimit || v < -kMagnitudeLimit) {
    throw Error(ErrorCode::BudgetExceeded, "intermediate value exceeds 118 bits");
  }
}

// Depth-first search over clamped residual boxes. A reachable full box or a
// cycle means an infinite admissible digit path whose cylinders all meet the
// box, so the box meets K.
int meets(const DigitSystem& sys, std::vector<i128> lo, std::vector<i128> hi, i128 den,
          std::uint64_t budget) {
  const std::size_t k = lo.size();
  using State = std::vector<i128>;  // lo_0..lo_{k-1}, hi_0..hi_{k-1}
  auto clamp = [&](State& s) {
    for (std::size_t j = 0; j < k; ++j) {
      s[j] = std::max<i128>(s[j], 0);
      s[k + j] = std::min<i128>(s[k + j], den);
      if (s[j] > s[k + j]) return false;
    }
    return true;
  };
  auto full = [&](const State& s) {
    for (std::size_t j = 0; j < k; ++j) {
      if (s[j] != 0 || s[k + j] != den) return false;
    }
    return true;
  };
  // In one dimension [x, 1] meets K iff x <= max K, and [0, y] iff y >= min K.
  int dmin = sys.base, dmax = -1;
  if (k == 1) {
    for (const auto& d : sys.digits) {
      dmin = std::min(dmin, d[0]);
      dmax = std::max(dmax, d[0]);
    }
  }
  const i128 b1 = sys.base - 1;
  auto settle = [&](const State& s) -> int {
    if (k != 1) return -1;
    if (s[0] == 0) return s[1] * b1 >= dmin * den ? 1 : 0;
    if (s[1] == den) return s[0] * b1 <= dmax * den ? 1 : 0;
    return -1;
  };
  State root(2 * k);
  for (std::size_t j = 0; j < k; ++j) {
    root[j] = lo[j];
    root[k + j] = hi[j];
  }
  if (!clamp(root)) return 0;
  if (full(root)) return 1;
  if (int v = settle(root); v >= 0) return v;

  enum : std::uint8_t { kOpen = 1, kDone = 2 };
  std::unordered_map<State, std::uint8_t, VecHash> status;
  struct Frame {
    State state;
    std::size_t next_digit;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  status[root] = kOpen;
  std::uint64_t nodes = 0;
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_digit == sys.digits.size()) {
      status[top.state] = kDone;
      stack.pop_back();
      continue;
    }
    const Digit& d = sys.digits[top.next_digit++];
    State child(2 * k);
    for (std::size_t j = 0; j < k; ++j) {
      child[j] = top.state[j] * sys.base - static_cast<i128>(d[j]) * den;
      child[k + j] = top.state[k + j] * sys.base - static_cast<i128>(d[j]) * den;
    }
    if (!clamp(child)) continue;
    if (full(child)) return 1;
    if (int v = settle(child); v >= 0) {
      if (v == 1) return 1;
      continue;
    }
    auto it = status.find(child);
    if (it != status.end()) {
      if (it->second == kOpen) return 1;
      continue;
    }
    if (++nodes > budget) return -1;
    status.emplace(child, kOpen);
    stack.push_back({std::move(child), 0});
  }
  return 0;
}

struct Context {
  const DigitSystem* sys;
  std::size_t k;
  int base;
  i128 rn;  // r = rn / rd
  i128 rd;
  bool zero;
  std::uint64_t budget;
  detail::DigitLookup lookup;
  std::vector<DigitSystem> factors;  // per-coordinate systems when D is a product set
};

// Boxes meet a product set iff every coordinate interval meets its factor.
int box_meets(const Context& ctx, std::vector<i128> lo, std::vector<i128> hi, i128 den) {
  if (ctx.factors.empty()) return meets(*ctx.sys, std::move(lo), std::move(hi), den, ctx.budget);
  int verdict = 1;
  for (std::size_t j = 0; j < ctx.k; ++j) {
    int v = meets(ctx.factors[j], {lo[j]}, {hi[j]}, den, ctx.budget);
    if (v == 0) return 0;
    verdict = std::min(verdict, v);
  }
  return verdict;
}

struct QOutcome {
  std::int64_t yes = 0;
  std::int64_t undecided = 0;
  std::vector<std::vector<std::int64_t>> points;
};

QOutcome scan_denominator(const Context& ctx, std::int64_t q, bool collect) {
  const std::size_t k = ctx.k;
  const i128 qq = q;
  std::unordered_map<std::vector<std::int64_t>, int, VecHash> decided;
  QOutcome out;

  auto decide = [&](const std::vector<std::int64_t>& a, const std::vector<i128>& corner, i128 B) {
    if (decided.count(a)) return;
    int verdict;
    if (ctx.zero) {
      bool inside = true;
      for (auto v : a) inside = inside && v >= 0 && v <= q;
      verdict = inside && detail::contains_fraction(*ctx.sys, ctx.lookup, a, q) ? 1 : 0;
    } else {
      // Whole cylinder within r of a/q: any point of K in it will do.
      i128 worst = 0;
      for (std::size_t j = 0; j < k; ++j) {
        i128 aB = static_cast<i128>(a[j]) * B;
        i128 left = corner[j] * qq - aB;
        i128 right = aB - (corner[j] + 1) * qq;
        worst = std::max({worst, left, right});
      }
      i128 lhs = (worst + qq) * ctx.rd;
      i128 rhs = ctx.rn * qq * B;
      guard(lhs);
      guard(rhs);
      if (lhs <= rhs) {
        verdict = 1;
      } else {
        const i128 den = qq * ctx.rd;
        std::vector<i128> lo(k), hi(k);
        for (std::size_t j = 0; j < k; ++j) {
          lo[j] = static_cast<i128>(a[j]) * ctx.rd - ctx.rn * qq;
          hi[j] = static_cast<i128>(a[j]) * ctx.rd + ctx.rn * qq;
        }
        verdict = box_meets(ctx, std::move(lo), std::move(hi), den);
      }
    }
    decided.emplace(a, verdict);
    if (verdict == 1) {
      ++out.yes;
      if (collect) out.points.push_back(a);
    } else if (verdict < 0) {
      ++out.undecided;
    }
  };

  struct Node {
    std::vector<i128> corner;  // numerators over B = b^m
    i128 B;
  };
  std::vector<Node> stack;
  stack.push_back({std::vector<i128>(k, 0), 1});
  std::vector<i128> lo_a(k), hi_a(k);
  std::vector<std::int64_t> a(k);
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    const i128 B = node.B;
    const i128 denom = B * ctx.rd;
    guard(denom * qq);
    i128 points = 1;
    bool empty = false;
    for (std::size_t j = 0; j < k && !empty; ++j) {
      i128 c = node.corner[j];
      lo_a[j] = ceil_div(qq * (c * ctx.rd - ctx.rn * B), denom);
      hi_a[j] = floor_div(qq * ((c + 1) * ctx.rd + ctx.rn * B), denom);
      if (lo_a[j] > hi_a[j]) {
        empty = true;
      } else {
        points *= hi_a[j] - lo_a[j] + 1;
      }
    }
    if (empty) continue;
    // Leaf: side at most r (delta > 0), side below 1/q (delta = 0), or a
    // single candidate left.
    bool leaf = points == 1;
    if (!leaf) leaf = ctx.zero ? B > qq : ctx.rd <= ctx.rn * B;
    if (leaf) {
      for (std::size_t j = 0; j < k; ++j) a[j] = static_cast<std::int64_t>(lo_a[j]);
      for (;;) {
        decide(a, node.corner, B);
        std::size_t j = 0;
        while (j < k && a[j] == static_cast<std::int64_t>(hi_a[j])) {
          a[j] = static_cast<std::int64_t>(lo_a[j]);
          ++j;
        }
        if (j == k) break;
        ++a[j];
      }
      continue;
    }
    const i128 child_B = B * ctx.base;
    guard(child_B * ctx.rd * qq);
    for (auto it = ctx.sys->digits.rbegin(); it != ctx.sys->digits.rend(); ++it) {
      Node child{node.corner, child_B};
      for (std::size_t j = 0; j < k; ++j) child.corner[j] = child.corner[j] * ctx.base + (*it)[j];
      stack.push_back(std::move(child));
    }
  }
  if (collect) std::sort(out.points.begin(), out.points.end());
  return out;
}

Context make_context(const DigitSystem& sys, const Rational& r, std::uint64_t budget) {
  validate(sys);
  if (r < 0) throw Error(ErrorCode::InvalidArgument, "delta must be non-negative");
  Context ctx{&sys,
              static_cast<std::size_t>(sys.dim),
              sys.base,
              to_i128(r.get_num()),
              to_i128(r.get_den()),
              r == 0,
              budget,
              detail::DigitLookup(sys),
              {}};
  if (sys.dim > 1) {
    if (auto f = coordinate_factors(sys)) ctx.factors = std::move(*f);
  }
  return ctx;
}

}  // namespace

DeltaSpec DeltaSpec::literal(Rational value) {
  DeltaSpec d;
  d.constant = std::move(value);
  return d;
}

DeltaSpec DeltaSpec::power(Rational c, Rational e) {
  DeltaSpec d;
  d.constant = std::move(c);
  d.exponent = std::move(e);
  d.scaled = true;
  return d;
}

DeltaSpec DeltaSpec::parse(const std::string& text) {
  static const std::regex scaled(
      R"(^\s*(?:([0-9.eE+\-/]+)\s*\*?\s*)?Q\s*\^\s*[\{\(]?\s*(-?[0-9.eE+/]+)\s*[\}\)]?\s*$)");
  // c/Q and c/Q^e
  static const std::regex divided(
      R"(^\s*([0-9.eE+]+)\s*/\s*Q(?:\s*\^\s*[\{\(]?\s*(-?[0-9.eE+/]+)\s*[\}\)]?)?\s*$)");
  std::smatch m;
  DeltaSpec d;
  try {
    if (std::regex_match(text, m, divided)) {
      d = power(parse_rational(m[1].str()), m[2].matched ? parse_rational(m[2].str()) : Rational(1));
    } else if (std::regex_match(text, m, scaled)) {
      Rational c = m[1].matched ? parse_rational(m[1].str()) : Rational(1);
      Rational e = -parse_rational(m[2].str());
      d = power(c, e);
    } else {
      d = literal(parse_rational(text));
    }
  } catch (const Error&) {
    throw Error(ErrorCode::ParseError, "cannot parse delta '" + text + "'");
  }
  if (d.constant < 0) throw Error(ErrorCode::InvalidArgument, "delta must be non-negative");
  return d;
}

namespace {

// Exact Q^e when it is rational.
std::optional<Rational> exact_power(std::int64_t Q, const Rational& e) {
  const BigInt& num = e.get_num();
  const BigInt& den = e.get_den();
  if (!den.fits_ulong_p() || !num.fits_slong_p()) return std::nullopt;
  long p = num.get_si();
  unsigned long s = den.get_ui();
  BigInt base = Q;
  BigInt raised;
  mpz_pow_ui(raised.get_mpz_t(), base.get_mpz_t(), static_cast<unsigned long>(p < 0 ? -p : p));
  BigInt root;
  if (mpz_root(root.get_mpz_t(), raised.get_mpz_t(), s) == 0) return std::nullopt;
  return p < 0 ? Rational(1) / Rational(root) : Rational(root);
}

}  // namespace

bool DeltaSpec::exact_at(std::int64_t Q) const {
  if (!scaled || constant == 0) return true;
  return exact_power(Q, -exponent).has_value();
}

Rational DeltaSpec::resolve(std::int64_t Q) const {
  if (!scaled || constant == 0) return constant;
  if (auto p = exact_power(Q, -exponent)) return constant * *p;
  double v = to_double(constant) * std::pow(static_cast<double>(Q), -to_double(exponent));
  double scaled_v = std::nearbyint(std::ldexp(v, 32));
  Rational out = rational_from_double(scaled_v);
  out /= Rational(BigInt(1) << 32);
  return out;
}

std::string DeltaSpec::to_string() const {
  if (!scaled) return digitfrac::to_string(constant);
  std::string s = constant == 1 ? std::string() : digitfrac::to_string(constant) + "*";
  return s + "Q^{" + digitfrac::to_string(-exponent) + "}";
}

double count_heuristic(const DigitSystem& sys, std::int64_t Q, const Rational& delta) {
  const double kappa = hausdorff_dimension(sys);
  return std::pow(to_double(delta), sys.dim - kappa) * std::pow(static_cast<double>(Q), kappa + 1);
}

CountResult count_near(const DigitSystem& sys, const CountQuery& query, const CountOptions& options) {
  if (query.Q < 1) throw Error(ErrorCode::InvalidArgument, "Q must be at least 1");
  const Rational r = query.delta / query.Q;
  const Context ctx = make_context(sys, r, options.node_budget);
  std::vector<QOutcome> per(static_cast<std::size_t>(query.Q));
  parallel_for(per.size(), resolve_threads(options.threads),
               [&](std::size_t i) { per[i] = scan_denominator(ctx, static_cast<std::int64_t>(i) + 1, false); });
  CountResult res;
  for (const auto& p : per) {
    res.count_lo += p.yes;
    res.count_hi += p.yes + p.undecided;
    res.per_q.push_back(p.yes);
  }
  res.exact = res.count_lo == res.count_hi;
  res.count = res.count_lo;
  res.heuristic = count_heuristic(sys, query.Q, query.delta);
  res.ratio = query.delta > 0 ? static_cast<double>(res.count) / res.heuristic
                              : std::numeric_limits<double>::quiet_NaN();
  return res;
}

std::int64_t count_on(const DigitSystem& sys, std::int64_t Q, const CountOptions& options) {
  return count_near(sys, CountQuery{Q, Rational(0)}, options).count;
}

std::vector<std::vector<std::int64_t>> near_points(const DigitSystem& sys, std::int64_t q,
                                                   const Rational& r, const CountOptions& options) {
  if (q < 1) throw Error(ErrorCode::InvalidArgument, "q must be at least 1");
  const Context ctx = make_context(sys, r, options.node_budget);
  QOutcome out = scan_denominator(ctx, q, true);
  if (out.undecided > 0) throw Error(ErrorCode::BudgetExceeded, "undecided points remain");
  return out.points;
}

int box_meets_fractal(const DigitSystem& sys, const RationalVector& lo, const RationalVector& hi,
                      std::uint64_t node_budget) {
  validate(sys);
  if (static_cast<int>(lo.size()) != sys.dim || static_cast<int>(hi.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "box dimension differs from system dimension");
  }
  BigInt den = 1;
  for (const auto* v : {&lo, &hi}) {
    for (const auto& x : *v) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), x.get_den_mpz_t());
  }
  std::vector<i128> l, h;
  for (const auto& x : lo) l.push_back(to_i128(x.get_num() * (den / x.get_den())));
  for (const auto& x : hi) h.push_back(to_i128(x.get_num() * (den / x.get_den())));
  return meets(sys, std::move(l), std::move(h), to_i128(den), node_budget);
}

DigitSystem slab_system(int b, int a, int k) {
  if (b < 2 || a < 1 || a >= b || k < 1) {
    throw Error(ErrorCode::BadSlabParams, "need b >= 2, 1 <= a < b, k >= 1");
  }
  std::vector<Digit> last;
  for (int d = 0; d < a; ++d) last.push_back({d});
  DigitSystem tail = DigitSystem::uniform(b, 1, last);
  if (k == 1) return tail;
  std::vector<DigitSystem> factors(static_cast<std::size_t>(k - 1), lebesgue_system(b, 1));
  factors.push_back(tail);
  return product_system(factors);
}

}  // namespace digitfrac
