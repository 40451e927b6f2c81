#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hemp/param_store.hpp"

namespace hemp {

struct Codebook {
  int layer_id = -1;
  std::vector<double> levels;  // strictly increasing reconstruction values
  bool reduced = false;        // input had fewer distinct values than requested

  int level_count() const { return static_cast<int>(levels.size()); }
};

struct LloydOptions {
  double tol = 1e-8;   // stop when relative MSE change drops below this
  int max_iter = 100;
};

// Scalar Lloyd-Max fit. Levels start at the (i+0.5)/N empirical quantiles
// (or at warm_start when given), then alternate nearest-level assignment and
// cell-mean updates. Empty cells are re-seeded at the midpoint of the widest
// occupied cell's value span. MSE is non-increasing per iteration; mse_trace
// records it when supplied. Fewer distinct inputs than N collapses to the
// distinct values with `reduced` set (at least 2 distinct values required).
Codebook fit_lloyd_max(std::span<const double> values, int levels,
                       const LloydOptions& opt = {},
                       const std::vector<double>* warm_start = nullptr,
                       std::vector<double>* mse_trace = nullptr);

// Degenerate identity codebook: levels are the sorted distinct values.
// Used to carry unquantized layers through the container format.
Codebook identity_codebook(std::span<const double> values);

// Nearest-level index per value, 1-based. Midpoint ties go to the lower index.
std::vector<std::int32_t> quantize(std::span<const double> values, const Codebook& cb);

// indices -> levels; throws on any index outside [1, N]
std::vector<double> reconstruct(std::span<const std::int32_t> indices, const Codebook& cb);

double quantization_mse(std::span<const double> values, const Codebook& cb);

// Per-layer index streams aligned with a ParamStore's registration order.
struct IndexMap {
  std::vector<std::vector<std::int32_t>> layers;

  std::vector<std::int32_t> flat() const;
  std::size_t total_count() const;
};

// codebooks[i] must carry layer_id i (one per store layer)
IndexMap quantize_store(const ParamStore& store, const std::vector<Codebook>& codebooks);

// New store with every value replaced by its reconstruction level.
ParamStore reconstruct_store(const ParamStore& store, const std::vector<Codebook>& codebooks,
                             const IndexMap& indices);

}  // namespace hemp
