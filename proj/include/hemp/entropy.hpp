#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hemp/binning.hpp"
#include "hemp/lloyd.hpp"
#include "hemp/param_store.hpp"

namespace hemp {

// Differentiable n-th order entropy over quantized parameters.
//
// Let the flat parameter order be grouped into T consecutive n-tuples
// (W_eff = n*T covered positions; any remainder is excluded). Each
// coordinate spreads soft mass onto its two bracketing levels, the joint
// tuple probability is the product of those marginals, and
//
//   S(xi)  = sum over tuples of the joint mass on index vector xi
//   H_n    = (n / W_eff) * sum_xi S(xi) * [log2 W_eff - log2 n - log2 S(xi)]
//
// which equals the plug-in entropy of the tuple stream when every
// parameter sits exactly on a level. Only the up-to-2^n index vectors that
// bracket a tuple carry mass, so cost is O(T * 2^n), not O(N^n).

inline constexpr int kMaxOrder = 8;          // support enumeration cap, 2^8 entries
inline constexpr double kLogFloor = 1e-12;   // floor inside gradient/bound logs only

struct EvalStats {
  std::int64_t tuples = 0;
  std::int64_t xi_evals = 0;    // total support entries touched
  int max_per_tuple = 0;

  double mean_support() const {
    return tuples ? static_cast<double>(xi_evals) / static_cast<double>(tuples) : 0.0;
  }
};

// Joint soft probability of one tuple: the supported index vectors (those
// with every coordinate on a positive-probability branch) and their
// product probabilities, in lexicographic order. Probabilities sum to 1
// over the support.
std::vector<std::pair<std::vector<std::int32_t>, double>> joint_soft_prob(
    std::span<const BinAssignment> coords);

double proxy_entropy(const ParamStore& store, const std::vector<Codebook>& codebooks,
                     const TupleView& view, EvalStats* stats = nullptr, int threads = 1);

// d proxy_entropy / d w, flat-aligned with the store. Remainder positions and
// clamped coordinates get 0.
std::vector<double> proxy_gradient(const ParamStore& store, const std::vector<Codebook>& codebooks,
                                   const TupleView& view, EvalStats* stats = nullptr,
                                   int threads = 1);

// Order-1 stationary point of the proxy entropy in w_i's bracketing interval,
// holding every other parameter fixed. Empty when w_i is clamped or when no
// stationary point exists in the interval.
std::optional<double> stationary_position(std::size_t flat_index, const ParamStore& store,
                                          const std::vector<Codebook>& codebooks);

// Closed-form upper bound on |d H_1 / d w_i|; equals the exact order-1
// gradient magnitude by construction (shared code path).
double gradient_bound(std::size_t flat_index, const ParamStore& store,
                      const std::vector<Codebook>& codebooks);

// ---- hard (plug-in) entropy of quantized index streams ----

struct TupleHistogram {
  int order = 1;
  std::unordered_map<std::uint64_t, std::int64_t> counts;  // packed tuple -> count
  std::int64_t total = 0;
};

// Packs indices[j*order .. j*order+order) into keys; trailing remainder
// symbols are dropped. Rejects an empty tuple set and non-positive indices.
TupleHistogram tuple_histogram(std::span<const std::int32_t> indices, int order);

// Plug-in entropy -sum p log2 p of the tuple stream, in bits per tuple.
double true_entropy(std::span<const std::int32_t> indices, int order);
double true_entropy(const IndexMap& indices, const TupleView& view);

struct EntropyReport {
  int order = 1;
  double h_proxy = 0.0;      // bits per tuple
  double h_true = 0.0;       // bits per tuple
  double per_symbol_proxy = 0.0;
  double per_symbol_true = 0.0;
};

EntropyReport entropy_report(const ParamStore& store, const std::vector<Codebook>& codebooks,
                             const IndexMap& indices, const TupleView& view, int threads = 1);

}  // namespace hemp
