#include "digitfrac/measure.hpp"

#include "digitfrac/error.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>

namespace digitfrac {

Box Box::closed(RationalVector lo, RationalVector hi) {
  Box b;
  b.closed_lo.assign(lo.size(), true);
  b.closed_hi.assign(hi.size(), true);
  b.lo = std::move(lo);
  b.hi = std::move(hi);
  return b;
}

Box Box::open(RationalVector lo, RationalVector hi) {
  Box b;
  b.closed_lo.assign(lo.size(), false);
  b.closed_hi.assign(hi.size(), false);
  b.lo = std::move(lo);
  b.hi = std::move(hi);
  return b;
}

Box Box::unit(int dim) {
  return closed(RationalVector(static_cast<std::size_t>(dim), Rational(0)),
                RationalVector(static_cast<std::size_t>(dim), Rational(1)));
}

Box Box::cylinder(int base, const std::vector<Digit>& prefix, int dim) {
  RationalVector lo(static_cast<std::size_t>(dim), Rational(0));
  Rational scale = 1;
  for (const auto& d : prefix) {
    scale /= base;
    for (int j = 0; j < dim; ++j) lo[j] += scale * d[j];
  }
  RationalVector hi = lo;
  for (auto& h : hi) h += scale;
  return closed(std::move(lo), std::move(hi));
}

Rational cylinder_weight(const DigitSystem& sys, const std::vector<Digit>& prefix) {
  Rational w = 1;
  for (const auto& d : prefix) {
    auto it = std::lower_bound(sys.digits.begin(), sys.digits.end(), d);
    if (it == sys.digits.end() || *it != d) return Rational(0);
    w *= sys.weights[static_cast<std::size_t>(it - sys.digits.begin())];
  }
  return w;
}

namespace {

// Residual set in one coordinate: either the singleton {lo} or an open
// interval (lo, hi). For open intervals `below` means the left end lies
// strictly left of 0 (so it may be taken as -infinity for a measure on
// [0,1]) and `above` that the right end lies strictly right of 1.
struct Coord {
  bool point = false;
  bool below = false;
  bool above = false;
  Rational lo;
  Rational hi;

  bool full() const { return !point && below && above; }
};

using State = std::vector<Coord>;

enum class Kind { Empty, Full, Boundary, Slice };

std::string key_of(const State& s) {
  std::string key;
  for (const auto& c : s) {
    if (c.point) {
      key += 'P';
      key += c.lo.get_str();
    } else {
      key += 'O';
      key += c.below ? std::string("-") : c.lo.get_str();
      key += ',';
      key += c.above ? std::string("+") : c.hi.get_str();
    }
    key += ';';
  }
  return key;
}

Kind classify(const State& s) {
  bool has_point = false;
  bool all_open_full = true;
  for (const auto& c : s) {
    if (c.point) {
      has_point = true;
    } else if (!c.full()) {
      all_open_full = false;
    }
  }
  if (!all_open_full) return Kind::Boundary;
  return has_point ? Kind::Slice : Kind::Full;
}

// Applies x -> b x - d to the residual set; returns false if the image misses
// [0,1] in this coordinate.
bool push_coord(const Coord& c, int base, int d, Coord& out) {
  out = c;
  if (c.point) {
    out.lo = c.lo * base - d;
    return out.lo >= 0 && out.lo <= 1;
  }
  if (!c.below) {
    out.lo = c.lo * base - d;
    if (out.lo < 0) out.below = true;
  }
  if (!c.above) {
    out.hi = c.hi * base - d;
    if (out.hi > 1) out.above = true;
  }
  if (out.below) out.lo = 0;
  if (out.above) out.hi = 1;
  if (!out.below && out.lo >= 1) return false;
  if (!out.above && out.hi <= 0) return false;
  if (!out.below && !out.above && out.lo >= out.hi) return false;
  return true;
}

// Splits a box coordinate into disjoint pieces (open interior plus closed
// endpoints as singletons).
std::vector<Coord> coordinate_pieces(const Rational& lo, const Rational& hi, bool cl, bool ch) {
  std::vector<Coord> pieces;
  if (lo == hi) {
    if (cl && ch) {
      Coord p;
      p.point = true;
      p.lo = lo;
      pieces.push_back(p);
    }
    return pieces;
  }
  Coord open;
  open.lo = lo;
  open.hi = hi;
  open.below = (lo == 0 && cl);
  open.above = (hi == 1 && ch);
  pieces.push_back(open);
  if (cl && lo > 0) {
    Coord p;
    p.point = true;
    p.lo = lo;
    pieces.push_back(p);
  }
  if (ch && hi < 1) {
    Coord p;
    p.point = true;
    p.lo = hi;
    pieces.push_back(p);
  }
  return pieces;
}

constexpr int kEmpty = -1;
constexpr int kFull = -2;

struct Edge {
  int target;
  std::size_t digit;
};

struct Graph {
  std::vector<State> states;
  std::vector<Kind> kinds;
  std::vector<std::vector<Edge>> edges;
  std::unordered_map<std::string, int> index;
  bool complete = true;
};

// Child of `s` under digit d: kEmpty, kFull, or a state id (inserted if new).
int child_of(Graph& g, const State& s, const DigitSystem& sys, std::size_t digit_index,
             std::deque<int>* queue, std::size_t max_states) {
  const Digit& d = sys.digits[digit_index];
  State next(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (!push_coord(s[j], sys.base, d[j], next[j])) return kEmpty;
  }
  Kind kind = classify(next);
  if (kind == Kind::Full) return kFull;
  std::string key = key_of(next);
  auto it = g.index.find(key);
  if (it != g.index.end()) return it->second;
  if (g.states.size() >= max_states) {
    g.complete = false;
    return kEmpty;
  }
  int id = static_cast<int>(g.states.size());
  g.index.emplace(std::move(key), id);
  g.states.push_back(std::move(next));
  g.kinds.push_back(kind);
  g.edges.emplace_back();
  if (queue) queue->push_back(id);
  return id;
}

int add_root(Graph& g, State s) {
  std::string key = key_of(s);
  auto it = g.index.find(key);
  if (it != g.index.end()) return it->second;
  int id = static_cast<int>(g.states.size());
  g.index.emplace(std::move(key), id);
  g.kinds.push_back(classify(s));
  g.states.push_back(std::move(s));
  g.edges.emplace_back();
  return id;
}

// Sparse linear system x_v = c_v + sum_t a_vt x_t over unknowns, solved by
// successive elimination and back-substitution.
class SparseSystem {
 public:
  explicit SparseSystem(std::size_t n) : rows_(n), constants_(n), users_(n) {}

  void add(std::size_t row, std::size_t col, const Rational& a) {
    rows_[row][col] += a;
    users_[col].insert(row);
  }
  void add_constant(std::size_t row, const Rational& c) { constants_[row] += c; }

  std::vector<Rational> solve() {
    const std::size_t n = rows_.size();
    std::vector<bool> eliminated(n, false);
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t v = n; v-- > 0;) {
      auto& row = rows_[v];
      auto self = row.find(v);
      if (self != row.end()) {
        Rational denom = Rational(1) - self->second;
        row.erase(self);
        if (denom == 0) throw Error(ErrorCode::InvalidArgument, "singular measure system");
        constants_[v] /= denom;
        for (auto& [col, a] : row) a /= denom;
      }
      for (std::size_t u : users_[v]) {
        if (u == v || eliminated[u]) continue;
        auto& urow = rows_[u];
        auto it = urow.find(v);
        if (it == urow.end()) continue;
        Rational alpha = it->second;
        urow.erase(it);
        constants_[u] += alpha * constants_[v];
        for (const auto& [col, a] : row) {
          urow[col] += alpha * a;
          users_[col].insert(u);
        }
      }
      eliminated[v] = true;
      order.push_back(v);
    }
    std::vector<Rational> x(n);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      std::size_t v = *it;
      Rational value = constants_[v];
      for (const auto& [col, a] : rows_[v]) value += a * x[col];
      x[v] = value;
    }
    return x;
  }

 private:
  std::vector<std::map<std::size_t, Rational>> rows_;
  std::vector<Rational> constants_;
  std::vector<std::set<std::size_t>> users_;
};

// Exact values of every state in a complete graph.
std::vector<Rational> solve_graph(const Graph& g, const DigitSystem& sys) {
  const std::size_t n = g.states.size();
  // A slice state (all open coordinates full, some singleton coordinates) keeps
  // mass that survives forever; a boundary state loses it. Unknowns are the
  // states that can reach an absorbing outcome that changes their value.
  std::vector<std::vector<int>> reverse(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& e : g.edges[s]) {
      if (e.target >= 0) reverse[static_cast<std::size_t>(e.target)].push_back(static_cast<int>(s));
    }
  }
  std::vector<bool> slice_can_die(n, false), boundary_can_exit(n, false);
  std::deque<int> work;
  for (std::size_t s = 0; s < n; ++s) {
    if (g.kinds[s] != Kind::Slice) continue;
    // Edges to EMPTY are not stored; missing weight is mass that dies.
    Rational kept = 0;
    for (const auto& e : g.edges[s]) kept += sys.weights[e.digit];
    if (kept < 1) {
      slice_can_die[s] = true;
      work.push_back(static_cast<int>(s));
    }
  }
  while (!work.empty()) {
    int s = work.front();
    work.pop_front();
    for (int p : reverse[static_cast<std::size_t>(s)]) {
      if (g.kinds[static_cast<std::size_t>(p)] == Kind::Slice && !slice_can_die[p]) {
        slice_can_die[p] = true;
        work.push_back(p);
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (g.kinds[s] != Kind::Boundary) continue;
    for (const auto& e : g.edges[s]) {
      if (e.target < 0 || g.kinds[static_cast<std::size_t>(e.target)] != Kind::Boundary) {
        boundary_can_exit[s] = true;
        work.push_back(static_cast<int>(s));
        break;
      }
    }
  }
  while (!work.empty()) {
    int s = work.front();
    work.pop_front();
    for (int p : reverse[static_cast<std::size_t>(s)]) {
      if (g.kinds[static_cast<std::size_t>(p)] == Kind::Boundary && !boundary_can_exit[p]) {
        boundary_can_exit[p] = true;
        work.push_back(p);
      }
    }
  }

  std::vector<int> unknown_id(n, -1);
  std::vector<Rational> fixed(n);
  std::size_t unknowns = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (g.kinds[s] == Kind::Slice) {
      if (slice_can_die[s]) {
        unknown_id[s] = static_cast<int>(unknowns++);
      } else {
        fixed[s] = 1;
      }
    } else {
      if (boundary_can_exit[s]) {
        unknown_id[s] = static_cast<int>(unknowns++);
      } else {
        fixed[s] = 0;
      }
    }
  }
  SparseSystem system(unknowns);
  for (std::size_t s = 0; s < n; ++s) {
    if (unknown_id[s] < 0) continue;
    auto row = static_cast<std::size_t>(unknown_id[s]);
    for (const auto& e : g.edges[s]) {
      const Rational& w = sys.weights[e.digit];
      if (e.target == kFull) {
        system.add_constant(row, w);
      } else if (e.target >= 0) {
        auto t = static_cast<std::size_t>(e.target);
        if (unknown_id[t] >= 0) {
          system.add(row, static_cast<std::size_t>(unknown_id[t]), w);
        } else if (fixed[t] != 0) {
          system.add_constant(row, w * fixed[t]);
        }
      }
    }
  }
  std::vector<Rational> solved = system.solve();
  std::vector<Rational> values(n);
  for (std::size_t s = 0; s < n; ++s) {
    values[s] = unknown_id[s] >= 0 ? solved[static_cast<std::size_t>(unknown_id[s])] : fixed[s];
  }
  return values;
}

// Level-by-level pushforward with merging of identical residual boxes.
// Mass reaching FULL is certainly inside, mass reaching EMPTY certainly
// outside; whatever remains after max_depth levels is undecided.
MeasureBracket bracket(const std::vector<State>& roots, const DigitSystem& sys, int max_depth) {
  std::map<std::string, std::pair<State, Rational>> frontier;
  for (const auto& r : roots) {
    auto& slot = frontier[key_of(r)];
    slot.first = r;
    slot.second += 1;
  }
  Rational inside = 0;
  int depth = 0;
  Graph scratch;
  while (!frontier.empty() && depth < max_depth) {
    std::map<std::string, std::pair<State, Rational>> next;
    for (const auto& [key, entry] : frontier) {
      const auto& [state, mass] = entry;
      for (std::size_t i = 0; i < sys.digits.size(); ++i) {
        const Digit& d = sys.digits[i];
        State child(state.size());
        bool alive = true;
        for (std::size_t j = 0; j < state.size() && alive; ++j) {
          alive = push_coord(state[j], sys.base, d[j], child[j]);
        }
        if (!alive) continue;
        Rational w = mass * sys.weights[i];
        if (classify(child) == Kind::Full) {
          inside += w;
          continue;
        }
        auto& slot = next[key_of(child)];
        if (slot.second == 0) slot.first = std::move(child);
        slot.second += w;
      }
    }
    frontier = std::move(next);
    ++depth;
  }
  Rational undecided = 0;
  for (const auto& [key, entry] : frontier) undecided += entry.second;
  MeasureBracket out;
  out.lower = inside;
  out.upper = inside + undecided;
  out.exact = frontier.empty();
  out.depth = depth;
  return out;
}

void check_box(const DigitSystem& sys, const Box& box) {
  if (box.dim() != sys.dim || static_cast<int>(box.hi.size()) != sys.dim ||
      static_cast<int>(box.closed_lo.size()) != sys.dim ||
      static_cast<int>(box.closed_hi.size()) != sys.dim) {
    throw Error(ErrorCode::DimensionMismatch, "box dimension differs from system dimension");
  }
  for (int j = 0; j < sys.dim; ++j) {
    if (box.lo[j] < 0 || box.hi[j] > 1 || box.lo[j] > box.hi[j]) {
      throw Error(ErrorCode::BoxOutOfRange, "box must satisfy 0 <= lo <= hi <= 1");
    }
  }
}

MeasureBracket generic_measure(const DigitSystem& sys, const Box& box,
                               const BoxMeasureOptions& options) {
  // Cartesian product of the per-coordinate pieces.
  std::vector<std::vector<Coord>> per_coord;
  for (int j = 0; j < sys.dim; ++j) {
    per_coord.push_back(coordinate_pieces(box.lo[j], box.hi[j], box.closed_lo[j], box.closed_hi[j]));
    if (per_coord.back().empty()) {
      MeasureBracket zero;
      zero.exact = true;
      return zero;
    }
  }
  std::vector<State> roots;
  std::vector<std::size_t> idx(per_coord.size(), 0);
  for (;;) {
    State s;
    for (std::size_t j = 0; j < per_coord.size(); ++j) s.push_back(per_coord[j][idx[j]]);
    roots.push_back(std::move(s));
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == per_coord[j].size()) idx[j++] = 0;
    if (j == idx.size()) break;
  }

  Rational full_roots = 0;
  std::vector<State> pending;
  for (auto& r : roots) {
    if (classify(r) == Kind::Full) {
      full_roots += 1;
    } else {
      pending.push_back(std::move(r));
    }
  }

  Graph g;
  std::vector<int> root_ids;
  std::deque<int> queue;
  for (const auto& r : pending) {
    int id = add_root(g, r);
    root_ids.push_back(id);
    if (g.edges[static_cast<std::size_t>(id)].empty()) queue.push_back(id);
  }
  std::set<int> queued(queue.begin(), queue.end());
  while (!queue.empty() && g.complete) {
    int s = queue.front();
    queue.pop_front();
    const State state = g.states[static_cast<std::size_t>(s)];
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < sys.digits.size(); ++i) {
      int t = child_of(g, state, sys, i, &queue, options.max_states);
      if (!g.complete) break;
      if (t != kEmpty) edges.push_back({t, i});
    }
    g.edges[static_cast<std::size_t>(s)] = std::move(edges);
  }

  MeasureBracket out;
  if (g.complete) {
    std::vector<Rational> values = solve_graph(g, sys);
    Rational total = full_roots;
    for (int id : root_ids) total += values[static_cast<std::size_t>(id)];
    out.lower = total;
    out.upper = total;
    out.exact = true;
    out.states = g.states.size();
    return out;
  }
  out = bracket(pending, sys, options.max_depth);
  out.lower += full_roots;
  out.upper += full_roots;
  out.states = g.states.size();
  return out;
}

}  // namespace

MeasureBracket box_measure(const DigitSystem& sys, const Box& box, const BoxMeasureOptions& options) {
  validate(sys);
  check_box(sys, box);

  if (options.shortcuts && sys.is_full() && sys.is_uniform()) {
    Rational volume = 1;
    for (int j = 0; j < sys.dim; ++j) volume *= box.hi[j] - box.lo[j];
    MeasureBracket out;
    out.lower = out.upper = volume;
    out.exact = true;
    return out;
  }
  if (options.shortcuts && sys.is_split()) {
    MeasureBracket out;
    out.lower = out.upper = 1;
    out.exact = true;
    for (int j = 0; j < sys.dim; ++j) {
      Box part;
      part.lo = {box.lo[j]};
      part.hi = {box.hi[j]};
      part.closed_lo = {box.closed_lo[j]};
      part.closed_hi = {box.closed_hi[j]};
      MeasureBracket m = box_measure(sys.factors[static_cast<std::size_t>(j)], part, options);
      out.lower *= m.lower;
      out.upper *= m.upper;
      out.exact = out.exact && m.exact;
      out.states += m.states;
      out.depth = std::max(out.depth, m.depth);
    }
    return out;
  }
  return generic_measure(sys, box, options);
}

}  // namespace digitfrac
