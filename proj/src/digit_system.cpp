#include "digitfrac/digit_system.hpp"

#include "digitfrac/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace digitfrac {

namespace {

std::int64_t ipow_checked(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (r > (std::int64_t{1} << 62) / base) {
      throw Error(ErrorCode::BudgetExceeded, "b^k exceeds 2^62");
    }
    r *= base;
  }
  return r;
}

void sort_digits(std::vector<Digit>& digits, std::vector<Rational>& weights) {
  std::vector<std::size_t> order(digits.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return digits[a] < digits[b]; });
  std::vector<Digit> d2;
  std::vector<Rational> w2;
  d2.reserve(digits.size());
  w2.reserve(weights.size());
  for (std::size_t i : order) {
    d2.push_back(std::move(digits[i]));
    if (i < weights.size()) w2.push_back(weights[i]);
  }
  digits = std::move(d2);
  weights = std::move(w2);
}

}  // namespace

DigitSystem DigitSystem::uniform(int base, int dim, std::vector<Digit> digits) {
  DigitSystem s;
  s.base = base;
  s.dim = dim;
  s.digits = std::move(digits);
  std::sort(s.digits.begin(), s.digits.end());
  if (!s.digits.empty()) {
    s.weights.assign(s.digits.size(), make_rational(1, static_cast<long long>(s.digits.size())));
  }
  return s;
}

DigitSystem DigitSystem::weighted(int base, int dim, std::vector<Digit> digits,
                                  std::vector<Rational> weights) {
  if (digits.size() != weights.size()) {
    throw Error(ErrorCode::WeightsNotNormalized, "digit and weight counts differ");
  }
  DigitSystem s;
  s.base = base;
  s.dim = dim;
  sort_digits(digits, weights);
  s.digits = std::move(digits);
  s.weights = std::move(weights);
  return s;
}

bool DigitSystem::is_uniform() const {
  return std::all_of(weights.begin(), weights.end(),
                     [&](const Rational& w) { return w == weights.front(); });
}

bool DigitSystem::is_full() const {
  double cells = std::pow(static_cast<double>(base), dim);
  return static_cast<double>(digits.size()) == cells;
}

ValidationReport validate(const DigitSystem& sys) {
  if (sys.base < 2) throw Error(ErrorCode::InvalidArgument, "base must be at least 2");
  if (sys.dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be at least 1");
  if (sys.digits.empty()) throw Error(ErrorCode::EmptyDigits, "digit set is empty");
  for (const auto& d : sys.digits) {
    if (static_cast<int>(d.size()) != sys.dim) {
      throw Error(ErrorCode::DimensionMismatch, "digit vector length differs from dimension");
    }
    for (int c : d) {
      if (c < 0 || c >= sys.base) {
        throw Error(ErrorCode::DigitOutOfRange,
                    "digit " + std::to_string(c) + " outside [0, " + std::to_string(sys.base - 1) + "]");
      }
    }
  }
  for (std::size_t i = 1; i < sys.digits.size(); ++i) {
    if (sys.digits[i] == sys.digits[i - 1]) {
      throw Error(ErrorCode::DuplicateDigit, "digit listed twice");
    }
  }
  if (sys.weights.size() != sys.digits.size()) {
    throw Error(ErrorCode::WeightsNotNormalized, "digit and weight counts differ");
  }
  Rational total = 0;
  for (const auto& w : sys.weights) {
    if (w <= 0) throw Error(ErrorCode::WeightsNotNormalized, "weights must be positive");
    total += w;
  }
  if (total != 1) {
    throw Error(ErrorCode::WeightsNotNormalized, "weights sum to " + to_string(total));
  }
  ValidationReport report;
  report.proper = sys.digits.size() >= 2 && !sys.is_full();
  return report;
}

double hausdorff_dimension(const DigitSystem& sys) {
  return std::log(static_cast<double>(sys.size())) / std::log(static_cast<double>(sys.base));
}

DigitSystem product_system(const std::vector<DigitSystem>& factors) {
  if (factors.empty()) throw Error(ErrorCode::InvalidArgument, "product of zero factors");
  const int base = factors.front().base;
  for (const auto& f : factors) {
    if (f.base != base) throw Error(ErrorCode::MixedBases, "factors have different bases");
    if (f.dim != 1) throw Error(ErrorCode::DimensionMismatch, "factors must be one-dimensional");
    validate(f);
  }
  if (factors.size() == 1) return factors.front();

  std::vector<Digit> digits{Digit{}};
  std::vector<Rational> weights{Rational(1)};
  for (const auto& f : factors) {
    std::vector<Digit> nd;
    std::vector<Rational> nw;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      for (std::size_t j = 0; j < f.digits.size(); ++j) {
        Digit d = digits[i];
        d.push_back(f.digits[j][0]);
        nd.push_back(std::move(d));
        nw.push_back(weights[i] * f.weights[j]);
      }
    }
    digits = std::move(nd);
    weights = std::move(nw);
  }
  DigitSystem s = DigitSystem::weighted(base, static_cast<int>(factors.size()), std::move(digits),
                                        std::move(weights));
  s.factors = factors;
  return s;
}

std::optional<std::vector<DigitSystem>> coordinate_factors(const DigitSystem& sys) {
  if (sys.is_split()) return sys.factors;
  if (sys.dim == 1) return std::vector<DigitSystem>{sys};
  std::vector<std::map<int, Rational>> marginals(static_cast<std::size_t>(sys.dim));
  for (std::size_t i = 0; i < sys.digits.size(); ++i) {
    for (int j = 0; j < sys.dim; ++j) marginals[j][sys.digits[i][j]] += sys.weights[i];
  }
  std::size_t product_size = 1;
  for (const auto& m : marginals) product_size *= m.size();
  if (product_size != sys.digits.size()) return std::nullopt;
  for (std::size_t i = 0; i < sys.digits.size(); ++i) {
    Rational p = 1;
    for (int j = 0; j < sys.dim; ++j) p *= marginals[j].at(sys.digits[i][j]);
    if (p != sys.weights[i]) return std::nullopt;
  }
  std::vector<DigitSystem> out;
  for (const auto& m : marginals) {
    std::vector<Digit> d;
    std::vector<Rational> w;
    for (const auto& [digit, weight] : m) {
      d.push_back(Digit{digit});
      w.push_back(weight);
    }
    out.push_back(DigitSystem::weighted(sys.base, 1, std::move(d), std::move(w)));
  }
  return out;
}

namespace detail {

DigitLookup::DigitLookup(const DigitSystem& sys)
    : base_(sys.base), dim_(sys.dim), cells_(ipow_checked(sys.base, sys.dim)) {
  constexpr std::int64_t kDenseLimit = std::int64_t{1} << 22;
  if (cells_ <= kDenseLimit) table_.assign(static_cast<std::size_t>(cells_), -1);
  for (std::size_t i = 0; i < sys.digits.size(); ++i) {
    std::int64_t code = encode(sys.digits[i]);
    if (!table_.empty()) {
      table_[static_cast<std::size_t>(code)] = static_cast<int>(i);
    } else {
      sparse_.emplace_back(code, static_cast<int>(i));
    }
    weights_.push_back(sys.weights[i].get_d());
  }
  std::sort(sparse_.begin(), sparse_.end());
}

std::int64_t DigitLookup::encode(std::span<const int> digit) const {
  std::int64_t code = 0;
  for (int j = dim_ - 1; j >= 0; --j) code = code * base_ + digit[static_cast<std::size_t>(j)];
  return code;
}

int DigitLookup::index_of(std::int64_t code) const {
  if (code < 0 || code >= cells_) return -1;
  if (!table_.empty()) return table_[static_cast<std::size_t>(code)];
  auto it = std::lower_bound(sparse_.begin(), sparse_.end(), std::make_pair(code, -1));
  if (it != sparse_.end() && it->first == code) return it->second;
  return -1;
}

DigitSampler::DigitSampler(const DigitSystem& sys) {
  BigInt lcm = 1;
  for (const auto& w : sys.weights) mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), w.get_den_mpz_t());
  exact_ = lcm <= BigInt(std::to_string(std::uint64_t{1} << 62));
  double running = 0;
  BigInt acc = 0;
  for (const auto& w : sys.weights) {
    running += w.get_d();
    cumulative_double_.push_back(running);
    if (exact_) {
      Rational scaled = w * Rational(lcm);
      acc += scaled.get_num();
      cumulative_.push_back(static_cast<std::uint64_t>(to_int64(acc)));
    }
  }
  if (exact_) total_ = static_cast<std::uint64_t>(to_int64(lcm));
}

std::size_t DigitSampler::draw(std::mt19937_64& rng) const {
  if (exact_) {
    // Rejection sampling keeps the draw unbiased and portable.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % total_;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    r %= total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    return static_cast<std::size_t>(it - cumulative_.begin());
  }
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  auto it = std::upper_bound(cumulative_double_.begin(), cumulative_double_.end(), u);
  std::size_t idx = static_cast<std::size_t>(it - cumulative_double_.begin());
  return std::min(idx, cumulative_double_.size() - 1);
}

namespace {

// One step of a base-b expansion of x = r/den. In standard mode the digit is
// floor(b x); in lower mode it is ceil(b x) - 1, which selects the expansion
// ending in (b-1)(b-1)... for b-adic x. Returns false if the digit leaves
// [0, b-1].
int as_int(__int128 v) { return static_cast<int>(v); }
int as_int(const BigInt& v) { return static_cast<int>(v.get_si()); }

template <typename Int>
bool expansion_step(Int& r, const Int& den, int base, bool lower, int& digit) {
  Int br = r * base;
  Int d = br / den;  // floor, everything non-negative
  if (lower) {
    if (d * den == br) d -= 1;
  }
  if (d < 0 || d >= base) return false;
  digit = as_int(d);
  r = br - d * den;
  return true;
}

template <typename Int>
bool walk_modes(const DigitLookup& lookup, int base, const std::vector<Int>& start, const Int& den,
                unsigned mode_mask) {
  const std::size_t k = start.size();
  std::vector<int> digit(k);
  auto step = [&](std::vector<Int>& state) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!expansion_step(state[j], den, base, (mode_mask >> j) & 1U, digit[j])) return false;
    }
    return lookup.contains(digit);
  };
  // Brent cycle detection: every state visited by the hare is checked, and
  // once a repeat is found all future states are repeats.
  std::vector<Int> tortoise = start;
  std::vector<Int> hare = start;
  if (!step(hare)) return false;
  std::uint64_t power = 1, lam = 1;
  while (tortoise != hare) {
    if (power == lam) {
      tortoise = hare;
      power *= 2;
      lam = 0;
    }
    if (!step(hare)) return false;
    ++lam;
  }
  return true;
}

template <typename Int>
bool contains_common(const DigitLookup& lookup, int base, const std::vector<Int>& nums,
                     const Int& den) {
  const std::size_t k = nums.size();
  for (unsigned mask = 0; mask < (1U << k); ++mask) {
    if (walk_modes(lookup, base, nums, den, mask)) return true;
  }
  return false;
}

}  // namespace

bool contains_fraction(const DigitSystem& sys, const DigitLookup& lookup,
                       std::span<const std::int64_t> numerators, std::int64_t den) {
  std::vector<__int128> nums(numerators.begin(), numerators.end());
  for (auto n : nums) {
    if (n < 0 || n > den) return false;
  }
  return contains_common<__int128>(lookup, sys.base, nums, static_cast<__int128>(den));
}

}  // namespace detail

SampledPoint sample(const DigitSystem& sys, int depth, std::uint64_t seed) {
  if (depth < 1) throw Error(ErrorCode::InvalidArgument, "sample depth must be at least 1");
  validate(sys);
  std::mt19937_64 rng(seed);
  detail::DigitSampler sampler(sys);
  SampledPoint p;
  p.depth = depth;
  p.coords.assign(static_cast<std::size_t>(sys.dim), Rational(0));
  Rational scale = 1;
  for (int j = 0; j < depth; ++j) {
    scale /= sys.base;
    const Digit& d = sys.digits[sampler.draw(rng)];
    p.digits.push_back(d);
    for (int c = 0; c < sys.dim; ++c) p.coords[c] += scale * d[c];
  }
  return p;
}

bool contains_rational(const DigitSystem& sys, std::span<const Rational> point) {
  validate(sys);
  if (static_cast<int>(point.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension differs from system dimension");
  }
  for (const auto& x : point) {
    if (x < 0 || x > 1) throw Error(ErrorCode::OutOfUnitCube, "coordinate " + to_string(x));
  }
  BigInt den = 1;
  for (const auto& x : point) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), x.get_den_mpz_t());
  std::vector<BigInt> nums;
  for (const auto& x : point) nums.push_back(x.get_num() * (den / x.get_den()));
  detail::DigitLookup lookup(sys);
  if (den <= BigInt(std::to_string(std::int64_t{1} << 56))) {
    std::vector<std::int64_t> small;
    for (const auto& n : nums) small.push_back(to_int64(n));
    return detail::contains_fraction(sys, lookup, small, to_int64(den));
  }
  return detail::contains_common<BigInt>(lookup, sys.base, nums, den);
}

DigitSystem cantor_system() { return DigitSystem::uniform(3, 1, {{0}, {2}}); }

DigitSystem lebesgue_system(int base, int dim) {
  std::vector<DigitSystem> factors;
  std::vector<Digit> digits;
  for (int d = 0; d < base; ++d) digits.push_back({d});
  DigitSystem one = DigitSystem::uniform(base, 1, digits);
  if (dim == 1) return one;
  return product_system(std::vector<DigitSystem>(static_cast<std::size_t>(dim), one));
}

nlohmann::json to_json(const DigitSystem& sys) {
  nlohmann::json j;
  j["base"] = sys.base;
  j["dim"] = sys.dim;
  j["digits"] = sys.digits;
  if (!sys.is_uniform()) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& x : sys.weights) {
      w.push_back({nlohmann::json::parse(x.get_num().get_str()),
                   nlohmann::json::parse(x.get_den().get_str())});
    }
    j["weights"] = w;
  }
  return j;
}

DigitSystem system_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "system must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "base" && it.key() != "dim" && it.key() != "digits" && it.key() != "weights") {
      throw Error(ErrorCode::ParseError, "unknown system field '" + it.key() + "'");
    }
  }
  try {
    int base = j.at("base").get<int>();
    int dim = j.contains("dim") ? j.at("dim").get<int>() : 1;
    std::vector<Digit> digits;
    for (const auto& d : j.at("digits")) {
      if (d.is_number_integer()) {
        digits.push_back({d.get<int>()});
      } else {
        digits.push_back(d.get<Digit>());
      }
    }
    if (!j.contains("weights")) return DigitSystem::uniform(base, dim, std::move(digits));
    std::vector<Rational> weights;
    for (const auto& w : j.at("weights")) {
      if (w.is_array() && w.size() == 2) {
        weights.push_back(make_rational(w[0].get<long long>(), w[1].get<long long>()));
      } else if (w.is_string()) {
        weights.push_back(parse_rational(w.get<std::string>()));
      } else {
        throw Error(ErrorCode::ParseError, "weights must be [numerator, denominator] pairs");
      }
    }
    return DigitSystem::weighted(base, dim, std::move(digits), std::move(weights));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::string system_hash(const DigitSystem& sys) {
  const std::string text = to_json(sys).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace digitfrac
