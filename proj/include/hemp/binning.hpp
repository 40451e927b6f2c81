#pragma once

#include <vector>

#include "hemp/lloyd.hpp"

namespace hemp {

// Two-neighbor linear assignment of a value to its bracketing codebook
// levels. For w in [r(k), r(k+1)) (half-open; w == r(N) brackets from below):
//   p_minus = 1 - (w - r(q-)) / delta,  p_plus = 1 - (r(q+) - w) / delta
// with delta = r(q+) - r(q-), so p_minus + p_plus == 1. Values strictly
// outside [r(1), r(N)] clamp: q- == q+ at the nearest extreme, p_minus = 1,
// and delta is the adjacent interval's width (such coordinates contribute no
// entropy gradient). Needs at least 2 levels.
struct BinAssignment {
  int q_minus = 0;  // 1-based level indices; equal only when clamped
  int q_plus = 0;
  double delta = 0.0;
  double p_minus = 0.0;
  double p_plus = 0.0;

  bool clamped() const { return q_minus == q_plus; }
};

BinAssignment assign_neighbors(double w, const Codebook& cb);

// Softmax-over-distance probabilities across all N levels,
//   p(xi) = exp(-|w - r(xi)|) / sum_j exp(-|w - r(j)|).
// Smooth reference model; kept for diagnostics and as the unit-test oracle
// for the two-neighbor fast path, not used in training.
std::vector<double> softmax_probs(double w, const Codebook& cb);

}  // namespace hemp
