#pragma once

#include "digitfrac/digit_system.hpp"
#include "digitfrac/rational.hpp"

#include <cstddef>
#include <vector>

namespace digitfrac {

// Axis-aligned box in [0,1]^k with rational endpoints and per-face closure.
struct Box {
  RationalVector lo;
  RationalVector hi;
  std::vector<bool> closed_lo;
  std::vector<bool> closed_hi;

  static Box closed(RationalVector lo, RationalVector hi);
  static Box open(RationalVector lo, RationalVector hi);
  static Box unit(int dim);
  // Closed cylinder of the digit string d^(1)...d^(m).
  static Box cylinder(int base, const std::vector<Digit>& prefix, int dim);

  int dim() const { return static_cast<int>(lo.size()); }
};

// Exact value when `exact`, otherwise a rigorous bracket lower <= mu <= upper.
struct MeasureBracket {
  Rational lower;
  Rational upper;
  bool exact = false;
  std::size_t states = 0;  // size of the explored residual-box graph
  int depth = 0;           // bracketing depth when not exact

  Rational gap() const { return upper - lower; }
  Rational midpoint() const { return (lower + upper) / 2; }
};

struct BoxMeasureOptions {
  // Residual-box graph size above which exact solving gives way to bracketing.
  std::size_t max_states = 4096;
  // Depth of the bracketing fallback.
  int max_depth = 160;
  // Use volume for Lebesgue systems and coordinate factorisation for split
  // systems. Disable to force the generic recursion.
  bool shortcuts = true;
};

// mu(box) for the system's missing-digit measure.
//
// The box is decomposed into products of open intervals and singletons.
// Each piece is pushed through the self-similarity mu(A) = sum_d P(d)
// mu(b A - d); rescaled residual boxes are the graph states. Because
// endpoints are rational the graph is finite, and the measure is the solution
// of the resulting linear system (solved exactly by sparse elimination).
// Mass that stays forever on the boundary of an open coordinate is outside
// the set; mass that stays forever on singleton coordinates is inside.
MeasureBracket box_measure(const DigitSystem& sys, const Box& box,
                           const BoxMeasureOptions& options = {});

// Product of the weights along a digit string (measure of the cylinder's
// contribution in the self-similar decomposition).
Rational cylinder_weight(const DigitSystem& sys, const std::vector<Digit>& prefix);

}  // namespace digitfrac
