#include "hemp/binning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hemp {

BinAssignment assign_neighbors(double w, const Codebook& cb) {
  const auto& lv = cb.levels;
  std::size_t n = lv.size();
  if (n < 2) throw std::invalid_argument("two-neighbor binning needs at least 2 levels");
  if (!std::isfinite(w)) throw std::invalid_argument("non-finite value in binning");

  BinAssignment a;
  if (w < lv.front()) {
    a.q_minus = a.q_plus = 1;
    a.p_minus = 1.0;
    a.p_plus = 0.0;
    a.delta = lv[1] - lv[0];
    return a;
  }
  if (w > lv.back()) {
    a.q_minus = a.q_plus = static_cast<int>(n);
    a.p_minus = 1.0;
    a.p_plus = 0.0;
    a.delta = lv[n - 1] - lv[n - 2];
    return a;
  }
  // largest k with r(k) <= w, capped at N-1 so w == r(N) brackets from below
  std::size_t k = static_cast<std::size_t>(std::upper_bound(lv.begin(), lv.end(), w) - lv.begin());
  if (k == 0) k = 1;                // w == lv.front() exactly
  if (k > n - 1) k = n - 1;
  a.q_minus = static_cast<int>(k);  // 1-based
  a.q_plus = static_cast<int>(k) + 1;
  a.delta = lv[k] - lv[k - 1];
  // p_plus as the exact complement keeps p_minus + p_plus == 1 bitwise
  a.p_minus = (lv[k] - w) / a.delta;
  a.p_plus = 1.0 - a.p_minus;
  return a;
}

std::vector<double> softmax_probs(double w, const Codebook& cb) {
  const auto& lv = cb.levels;
  if (lv.empty()) throw std::invalid_argument("empty codebook");
  if (!std::isfinite(w)) throw std::invalid_argument("non-finite value in binning");
  // shift by the smallest distance before exponentiating to avoid underflow
  double dmin = std::abs(w - lv[0]);
  for (double r : lv) dmin = std::min(dmin, std::abs(w - r));
  std::vector<double> p(lv.size());
  double z = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    p[i] = std::exp(dmin - std::abs(w - lv[i]));
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace hemp
