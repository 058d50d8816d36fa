#include "oracles.hpp"

#include "digitfrac/approx.hpp"
#include "digitfrac/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace digitfrac;

namespace {

Rational q(long long p, long long d = 1) { return make_rational(p, d); }

std::vector<std::int64_t> hit_ns(const std::vector<HitRecord>& h) {
  std::vector<std::int64_t> out;
  for (const auto& r : h) out.push_back(r.n);
  return out;
}

// ||n p/d|| as a fraction with denominator d, computed on integers.
long long near_num(long long n, long long p, long long d) {
  long long r = (n * p) % d;
  return std::min(r, d - r);
}

double frac_dist(double v) {
  double f = v - std::floor(v);
  return std::min(f, 1 - f);
}

double cantor_draw(std::mt19937_64& rng) {
  double x = 0, s = 1;
  for (int j = 0; j < 34; ++j) {
    s /= 3;
    x += (rng() & 1u) ? 2 * s : 0;
  }
  return x;
}

// Lebesgue measure of the lower and upper families at n, k = 2, computed from
// the distribution of (||n x_1||, ||n x_2||), uniform on [0, 1/2]^2.
std::pair<double, double> lebesgue_family_areas(const Sandwich& s, std::int64_t n) {
  auto clip = [](double v) { return std::min(v, 0.5); };
  double lower = 0;
  for (const auto& sh : s.lower.shapes) {
    double a = 1;
    for (const auto& side : sh.sides) {
      double w = to_double(side) * n;
      a *= clip(w) - clip(w / 2);
    }
    lower += a;
  }
  std::vector<std::pair<double, double>> boxes;
  for (const auto& sh : s.upper.shapes)
    boxes.push_back({clip(to_double(sh.sides[0]) * n), clip(to_double(sh.sides[1]) * n)});
  std::sort(boxes.begin(), boxes.end(), std::greater<>());
  double upper = 0, best = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    best = std::max(best, boxes[i].second);
    double next = i + 1 < boxes.size() ? boxes[i + 1].first : 0;
    upper += (boxes[i].first - next) * best;
  }
  return {4 * lower, 4 * upper};
}

}  // namespace

TEST_SUITE("approx") {

TEST_CASE("psi families") {
  CHECK(psi_eval(ApproxFunction::power_t(2), 10) == doctest::Approx(0.01));
  CHECK(psi_eval(ApproxFunction::power_log_sim(1), 8) == doctest::Approx(1.0 / (8 * std::log(8.0) * std::log(8.0))));
  CHECK(psi_eval(ApproxFunction::power_log_sim(1), 8) == doctest::Approx(0.0289).epsilon(0.01));
  CHECK(psi_eval(ApproxFunction::power_log_mult(2), 8) == doctest::Approx(1.0 / (8 * std::pow(std::log(8.0), 3))));
  CHECK(psi_eval(ApproxFunction::parse("constant:0.3"), 17) == doctest::Approx(0.3));
  CHECK(psi_exact(ApproxFunction::parse("constant:0.3"), 17) == q(3, 10));
  CHECK(psi_exact(ApproxFunction::power_t(2), 10) == q(1, 100));
  CHECK(psi_eval(ApproxFunction::power_t(1), 1) == doctest::Approx(1 - 1e-9));
  CHECK(psi_eval(ApproxFunction::power_t(0), 5) < 1.0);
  CHECK(ApproxFunction::parse("power_t:2").to_string() == "power_t:2");
  CHECK(ApproxFunction::parse("constant:3/10").to_string() == "constant:3/10");
  CHECK_THROWS_AS(ApproxFunction::parse("power_t:-1"), Error);
  CHECK_THROWS_AS(ApproxFunction::parse("power_log_sim:1.5"), Error);
  CHECK_THROWS_AS(ApproxFunction::parse("wiggle:1"), Error);
  CHECK_THROWS_AS(ApproxFunction::parse("constant:1"), Error);

  for (const auto& f : {ApproxFunction::power_t(0.7), ApproxFunction::power_log_sim(2),
                        ApproxFunction::power_log_mult(1)}) {
    double prev = 2;
    for (std::int64_t n = 3; n < 2000; ++n) {
      double v = psi_eval(f, n);
      CHECK(v <= prev);
      CHECK(v >= 0);
      CHECK(v < 1);
      prev = v;
    }
  }
}

TEST_CASE("hits examples") {
  auto h = hits({q(1, 2)}, {q(0)}, ApproxFunction::parse("constant:0.3"), 1, 4, ApproxMode::Sim);
  CHECK(hit_ns(h) == std::vector<std::int64_t>{2, 4});
  CHECK(h[0].witnesses == std::vector<std::int64_t>{1});
  CHECK(hits({q(2, 7), q(1, 3)}, {}, ApproxFunction::constant(0), 1, 100, ApproxMode::Mult).empty());

  // x = (1/3, 1/2), psi = 1/n, product of distances: integer scan.
  auto got = hit_ns(hits({q(1, 3), q(1, 2)}, {}, ApproxFunction::power_t(1), 1, 12, ApproxMode::Mult));
  std::vector<std::int64_t> expected;
  for (long long n = 1; n <= 12; ++n) {
    // (a/3)(b/2) < 1/n  <=>  a b n < 6
    long long a = near_num(n, 1, 3), b = near_num(n, 1, 2);
    bool hit = n == 1 ? a * b * 1 < 6 * (1 - 1e-9) : a * b * n < 6;
    if (hit) expected.push_back(n);
  }
  CHECK(got == expected);
}

TEST_CASE("hits properties") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    Rational x = q(static_cast<long long>(rng() % 1000), 997);
    Rational y = q(static_cast<long long>(rng() % 100), 89);
    auto f = ApproxFunction::power_t(0.5 + (rng() % 10) / 10.0);
    auto sim = hit_ns(hits({x}, {y}, f, 1, 300, ApproxMode::Sim));
    auto mult = hit_ns(hits({x}, {y}, f, 1, 300, ApproxMode::Mult));
    CHECK(sim == mult);
    CHECK(hit_ns(hits({x}, {y + 3}, f, 1, 300, ApproxMode::Sim)) == sim);
    CHECK(hit_ns(hits({x}, {y - 2}, f, 1, 300, ApproxMode::Sim)) == sim);
    auto bigger = hit_ns(hits({x}, {y}, ApproxFunction::power_t(0.4), 1, 300, ApproxMode::Sim));
    for (auto n : hit_ns(hits({x}, {y}, ApproxFunction::power_t(0.5), 1, 300, ApproxMode::Sim)))
      CHECK(std::find(bigger.begin(), bigger.end(), n) != bigger.end());
  }
}

TEST_CASE("khinchin sums, Lebesgue and trivial cases") {
  auto f = ApproxFunction::power_t(2);
  auto leb = khinchin_sum_mu(lebesgue_system(3, 2), f, {q(1, 5), q(2, 7)}, 30);
  CHECK(leb.exact);
  for (std::size_t i = 0; i < leb.n.size(); ++i) {
    Rational psi = q(1, leb.n[i] * leb.n[i]);
    CHECK(leb.term_lo[i] == 4 * psi * psi);
  }
  BoxMeasureOptions generic;
  generic.shortcuts = false;
  SumOptions so;
  so.measure = generic;
  auto leb1 = khinchin_sum_mu(lebesgue_system(2, 1), ApproxFunction::power_t(1), {q(1, 3)}, 20, so);
  for (std::size_t i = 0; i < leb1.n.size(); ++i) {
    // psi(2) = 1/2 is clipped.
    // The clipped endpoint has period 4*5^8 in base 2, so that term is only bracketed.
    Rational expected = leb1.n[i] == 2 ? 1 - q(2, 1000000000) : q(2, leb1.n[i]);
    CHECK(leb1.term_lo[i] <= expected);
    CHECK(leb1.term_hi[i] >= expected);
    CHECK(to_double(leb1.term_hi[i] - leb1.term_lo[i]) <= 1e-12);
    if (leb1.n[i] != 2) CHECK(leb1.term_lo[i] == expected);
  }

  auto zero = khinchin_sum_mu(cantor_system(), ApproxFunction::constant(0), {}, 20);
  CHECK(zero.partial_hi.back() == 0);

  auto lsum = khinchin_sum_lebesgue(ApproxFunction::power_t(1), 1, 30);
  for (std::size_t i = 0; i < leb1.n.size(); ++i) {
    CHECK(lsum[i] >= leb1.partial_lo[i]);
    CHECK(lsum[i] <= leb1.partial_hi[i]);
  }
}

TEST_CASE("khinchin_sum_lebesgue arithmetic") {
  SumOptions from1;
  from1.first_n = 1;
  auto s = khinchin_sum_lebesgue(ApproxFunction::power_t(1), 1, 3, from1);
  REQUIRE(s.size() == 3);
  // psi(1) = 1 and psi(2) = 1/2 both clip to 1/2 - 1e-9.
  const Rational clipped = 2 * (q(1, 2) - q(1, 1000000000));
  CHECK(s[0] == clipped);
  CHECK(s[1] == 2 * clipped);
  CHECK(s[2] == 2 * clipped + q(2, 3));
  SumOptions strict;
  strict.clip = false;
  CHECK_THROWS_AS(khinchin_sum_lebesgue(ApproxFunction::power_t(1), 1, 3, strict), Error);
  CHECK(khinchin_sum_lebesgue(ApproxFunction::constant(0), 2, 50).back() == 0);

  // psi = n^(-1/k): the series is 2^k sum 1/n, away from the clipped range.
  SumOptions from5;
  from5.first_n = 5;
  for (int k : {1, 2}) {
    const std::int64_t N = 20000;
    auto v = khinchin_sum_lebesgue(ApproxFunction::power_t(1.0 / k), k, N, from5);
    double harmonic = 0;
    for (std::int64_t n = 5; n <= N; ++n) harmonic += 1.0 / n;
    CHECK(to_double(v.back()) == doctest::Approx(std::pow(2.0, k) * harmonic).epsilon(1e-9));
    CHECK(to_double(v.back()) / (std::pow(2.0, k) * std::log(static_cast<double>(N))) ==
          doctest::Approx(1.0).epsilon(0.2));
  }
}

TEST_CASE("khinchin on Cantor agrees with Monte Carlo") {
  const DigitSystem c = cantor_system();
  auto f = ApproxFunction::power_t(2);
  auto series = khinchin_sum_mu(c, f, {}, 64);
  CHECK(series.exact);
  std::mt19937_64 rng(123);
  const int samples = 100000;
  std::vector<double> xs(samples);
  for (auto& x : xs) x = cantor_draw(rng);
  for (std::size_t i = 0; i < series.n.size(); i += 7) {
    const std::int64_t n = series.n[i];
    const double psi = 1.0 / (static_cast<double>(n) * n);
    int inside = 0;
    for (double x : xs) inside += frac_dist(n * x) < psi;
    const double p = to_double(series.term_lo[i]);
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / samples);
    CHECK(std::fabs(static_cast<double>(inside) / samples - p) <= 3 * sigma + 1.0 / samples);
  }
}

TEST_CASE("khinchin terms agree with Monte Carlo on random cases") {
  const DigitSystem c = cantor_system();
  std::mt19937_64 rng(321);
  const int samples = 20000;
  std::vector<double> xs(samples);
  for (auto& x : xs) x = cantor_draw(rng);
  for (int t = 0; t < 20; ++t) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng() % 150);
    const Rational psi = q(1 + static_cast<long long>(rng() % 40), 100);
    const Rational y = q(static_cast<long long>(rng() % 50), 50);
    SumOptions o;
    o.first_n = n;
    auto s = khinchin_sum_mu(c, ApproxFunction::constant(psi), {y}, n, o);
    const double p = to_double(s.term_lo[0]);
    int inside = 0;
    for (double x : xs) inside += frac_dist(n * x - to_double(y)) < to_double(psi);
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / samples);
    CHECK(std::fabs(static_cast<double>(inside) / samples - p) <= 3 * sigma + 1.0 / samples);
  }
}

TEST_CASE("khinchin monotone in psi and periodic in y") {
  const DigitSystem cc = product_system({cantor_system(), cantor_system()});
  auto small = khinchin_sum_mu(cc, ApproxFunction::constant(q(1, 10)), {q(1, 4), q(0)}, 12);
  auto large = khinchin_sum_mu(cc, ApproxFunction::constant(q(1, 5)), {q(1, 4), q(0)}, 12);
  auto shifted = khinchin_sum_mu(cc, ApproxFunction::constant(q(1, 10)), {q(5, 4), q(-3)}, 12);
  for (std::size_t i = 0; i < small.n.size(); ++i) {
    CHECK(small.term_lo[i] <= large.term_lo[i]);
    CHECK(small.term_lo[i] == shifted.term_lo[i]);
  }
  SumOptions par;
  par.threads = 3;
  auto p = khinchin_sum_mu(cc, ApproxFunction::constant(q(1, 10)), {q(1, 4), q(0)}, 12, par);
  CHECK(p.partial_lo == small.partial_lo);
}

TEST_CASE("dyadic sandwich shapes") {
  auto f = ApproxFunction::power_t(1);
  auto one = dyadic_sandwich(f, 5, 1);
  CHECK(one.lower.shapes.size() == 1);
  CHECK(one.upper.shapes.size() == 1);
  CHECK(one.lower.shells);

  for (int m : {3, 6, 9}) {
    auto s = dyadic_sandwich(f, m, 2);
    CHECK(s.lower.shapes.size() == s.upper.shapes.size());
    const Rational target = psi_exact(f, std::int64_t{1} << m) / Rational(BigInt(1) << (2 * m));
    for (const auto& sh : s.lower.shapes) CHECK(sh.sides[0] * sh.sides[1] == target);
    Rational up = -1;
    for (const auto& sh : s.upper.shapes) {
      if (up < 0) up = sh.sides[0] * sh.sides[1];
      CHECK(sh.sides[0] * sh.sides[1] == up);
    }
  }
}

TEST_CASE("sandwich holds pointwise") {
  auto f = ApproxFunction::power_t(1);
  const int m = 6;
  auto s = dyadic_sandwich(f, m, 2);
  std::mt19937_64 rng(17);
  int violations = 0;
  for (int t = 0; t < 2000; ++t) {
    const long long d = 1000003;
    RationalVector x{q(static_cast<long long>(rng() % d), d), q(static_cast<long long>(rng() % d), d)};
    RationalVector y{q(static_cast<long long>(rng() % 7), 7), q(0)};
    for (std::int64_t n = 32; n < 64; ++n) {
      bool lo = in_lower(s, n, x, y), mid = in_mult(f, n, x, y), hi = in_upper(s, n, x, y);
      if ((lo && !mid) || (mid && !hi)) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("gallagher sums") {
  auto f = ApproxFunction::power_t(1);
  // One coordinate: identical to the Khinchin series.
  auto g1 = gallagher_sum_mu(cantor_system(), f, {}, 40);
  auto k1 = khinchin_sum_mu(cantor_system(), f, {}, 40);
  CHECK(g1.lower.partial_lo == k1.partial_lo);
  CHECK(g1.upper.partial_hi == k1.partial_hi);

  auto zero = gallagher_sum_mu(lebesgue_system(2, 2), ApproxFunction::constant(0), {}, 20);
  CHECK(zero.upper.partial_hi.back() == 0);

  const DigitSystem w = DigitSystem::weighted(3, 2, {{0, 0}, {2, 0}, {1, 2}}, {q(1, 2), q(1, 4), q(1, 4)});
  for (const auto& sys : {product_system({cantor_system(), cantor_system()}), w}) {
    auto g = gallagher_sum_mu(sys, f, {q(1, 3), q(0)}, 24);
    for (std::size_t i = 0; i < g.lower.n.size(); ++i) CHECK(g.lower.term_hi[i] <= g.upper.term_lo[i]);
  }
}

TEST_CASE("gallagher on Lebesgue matches the closed form") {
  auto f = ApproxFunction::power_t(1);
  auto g = gallagher_sum_mu(lebesgue_system(2, 2), f, {}, 128);
  for (std::size_t i = 0; i < g.lower.n.size(); ++i) {
    const std::int64_t n = g.lower.n[i];
    int m = 0;
    while ((std::int64_t{1} << m) <= n) ++m;
    auto [lo, hi] = lebesgue_family_areas(dyadic_sandwich(f, m, 2), n);
    CHECK(to_double(g.lower.term_lo[i]) == doctest::Approx(lo).epsilon(1e-12));
    CHECK(to_double(g.upper.term_lo[i]) == doctest::Approx(hi).epsilon(1e-12));
  }
  const double ratio = to_double(g.upper.partial_hi.back()) / to_double(g.lower.partial_lo.back());
  // Each shell widens the upper family by 2^(k-1) * 2^k * psi(2^(m-1)) / psi(2^m) = 16 over the lower.
  CHECK(ratio == doctest::Approx(17.9372).epsilon(1e-5));
}

TEST_CASE("limsup estimates") {
  auto none = limsup_fraction(cantor_system(), ApproxFunction::constant(0), {}, 1, 50, 500, 1, ApproxMode::Sim);
  CHECK(none.hits == 0);
  CHECK(none.fraction == 0);

  auto leb = limsup_fraction(lebesgue_system(2, 1), ApproxFunction::parse("constant:0.4"), {q(0)}, 1, 1, 20000, 7,
                             ApproxMode::Sim);
  CHECK(leb.ci_lo <= 0.8);
  CHECK(leb.ci_hi >= 0.8);
  CHECK(std::fabs(leb.fraction - 0.8) <= 3 * leb.sigma);

  auto a = limsup_fraction(cantor_system(), ApproxFunction::power_t(2), {}, 16, 31, 3000, 42, ApproxMode::Sim, 1);
  auto b = limsup_fraction(cantor_system(), ApproxFunction::power_t(2), {}, 16, 31, 3000, 42, ApproxMode::Sim, 4);
  CHECK(a.hits == b.hits);
  CHECK(a.depth >= 2 * std::log(31.0) / std::log(3.0));
}

TEST_CASE("intrinsic approximation") {
  const DigitSystem c = cantor_system();
  auto found = intrinsic_hits(c, {q(1, 4)}, 3.0, 10);
  auto has = [&](std::int64_t a, std::int64_t n) {
    return std::any_of(found.begin(), found.end(),
                       [&](const IntrinsicHit& h) { return h.n == n && h.a == std::vector<std::int64_t>{a}; });
  };
  CHECK(has(1, 4));
  CHECK(has(2, 8));

  for (double tau : {0.0, 0.5, 1.0, 2.0}) {
    auto got = intrinsic_hits(c, {q(1, 2)}, tau, 10);
    std::vector<std::pair<std::int64_t, std::int64_t>> expected, seen;
    for (std::int64_t n = 1; n <= 10; ++n)
      for (std::int64_t a = 0; a <= n; ++a)
        if (oracle::member(c, {q(a, n)}) && std::fabs(n - 2.0 * a) * std::pow(n, tau) < 2.0 - 1e-12)
          expected.push_back({a, n});
    for (const auto& h : got) seen.push_back({h.a[0], h.n});
    std::sort(expected.begin(), expected.end());
    std::sort(seen.begin(), seen.end());
    CHECK(seen == expected);
  }

  auto p = sample(c, 40, 5);
  // n = 1 always qualifies since 1^-tau = 1.
  for (const auto& h : intrinsic_hits(c, p.coords, 10.0, 100)) CHECK(h.n == 1);
}

}  // TEST_SUITE
