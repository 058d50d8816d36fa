#pragma once

#include "digitfrac/rational.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace digitfrac {

using Digit = std::vector<int>;

// A missing-digit system: base b, ambient dimension k, digit set D in
// {0,...,b-1}^k and a probability vector on D. The associated measure is the
// law of sum_j d_j / b^j with i.i.d. digits; its support is the fractal K.
//
// Digits are kept sorted lexicographically with weights parallel to them.
// Construction does not validate; call validate() before relying on the
// invariants.
struct DigitSystem {
  int base = 2;
  int dim = 1;
  std::vector<Digit> digits;
  std::vector<Rational> weights;
  // One-dimensional factors, present when built by product_system().
  std::vector<DigitSystem> factors;

  static DigitSystem uniform(int base, int dim, std::vector<Digit> digits);
  static DigitSystem weighted(int base, int dim, std::vector<Digit> digits,
                              std::vector<Rational> weights);

  std::size_t size() const { return digits.size(); }
  bool is_split() const { return !factors.empty(); }
  bool is_uniform() const;
  // True when D is all of {0,...,b-1}^k.
  bool is_full() const;

  friend bool operator==(const DigitSystem& a, const DigitSystem& b) {
    return a.base == b.base && a.dim == b.dim && a.digits == b.digits && a.weights == b.weights;
  }
};

struct ValidationReport {
  bool proper = false;  // 2 <= #D < b^k
};

ValidationReport validate(const DigitSystem& sys);

double hausdorff_dimension(const DigitSystem& sys);

// Cartesian product of one-dimensional systems sharing a base.
DigitSystem product_system(const std::vector<DigitSystem>& factors);

// Returns the coordinate marginals when the system is a product of them
// (digit set is a product set and weights factor), otherwise nullopt.
// Uses the stored factors when available.
std::optional<std::vector<DigitSystem>> coordinate_factors(const DigitSystem& sys);

struct SampledPoint {
  RationalVector coords;
  int depth = 0;
  std::vector<Digit> digits;  // d^(1), ..., d^(depth)
};

// Draws depth i.i.d. digits with probabilities P and returns the truncated
// point sum_{j<=depth} d^(j)/b^j. Deterministic in seed.
SampledPoint sample(const DigitSystem& sys, int depth, std::uint64_t seed);

// Exact membership of a rational point in K: true iff some base-b
// expansion of each coordinate yields digit vectors all lying in D.
bool contains_rational(const DigitSystem& sys, std::span<const Rational> point);

// Built-in systems.
DigitSystem cantor_system();
DigitSystem lebesgue_system(int base, int dim);

nlohmann::json to_json(const DigitSystem& sys);
DigitSystem system_from_json(const nlohmann::json& j);

// Hex FNV-1a digest of the canonical JSON form.
std::string system_hash(const DigitSystem& sys);

namespace detail {

// Fast digit membership and weight lookup. Digit vectors are encoded as
// sum_j d_j b^j.
class DigitLookup {
 public:
  explicit DigitLookup(const DigitSystem& sys);

  std::int64_t encode(std::span<const int> digit) const;
  // Index into sys.digits, or -1 if the code is not a digit.
  int index_of(std::int64_t code) const;
  bool contains(std::span<const int> digit) const { return index_of(encode(digit)) >= 0; }

  const std::vector<double>& weights() const { return weights_; }
  std::int64_t cells() const { return cells_; }

 private:
  int base_;
  int dim_;
  std::int64_t cells_;
  std::vector<int> table_;  // dense when b^k is small
  std::vector<std::pair<std::int64_t, int>> sparse_;
  std::vector<double> weights_;
};

// Samples digit indices according to the exact rational weights.
class DigitSampler {
 public:
  explicit DigitSampler(const DigitSystem& sys);
  std::size_t draw(std::mt19937_64& rng) const;

 private:
  std::vector<std::uint64_t> cumulative_;  // over a common denominator
  std::uint64_t total_ = 0;
  std::vector<double> cumulative_double_;
  bool exact_ = true;
};

// Membership for a point with a common positive denominator; numerators must
// satisfy 0 <= num <= den.
bool contains_fraction(const DigitSystem& sys, const DigitLookup& lookup,
                       std::span<const std::int64_t> numerators, std::int64_t den);

}  // namespace detail

}  // namespace digitfrac
