#pragma once

#include <span>
#include <vector>

#include "hemp/entropy.hpp"
#include "hemp/lloyd.hpp"
#include "hemp/param_store.hpp"

namespace hemp {

struct RegConfig {
  double lambda_h = 1.0;   // entropy term weight
  double lambda_e = 0.1;   // reconstruction term weight
  int order = 2;           // tuple order n for the entropy term
  bool insensitivity = true;  // scale the update by (1 - |g|/max|g|)
  bool global_max = false;    // insensitivity max over the whole net, not per layer
};

// E = sqrt(mean squared distance between each parameter and its assigned
// level), over the whole store. Zero exactly when every value sits on a level.
double reconstruction_error(const ParamStore& store, const std::vector<Codebook>& codebooks,
                            const IndexMap& indices);

// dE/dw_i = (w_i - r(q_i)) / (count * E); all zeros when E == 0.
std::vector<double> reconstruction_gradient(const ParamStore& store,
                                            const std::vector<Codebook>& codebooks,
                                            const IndexMap& indices);

// Per-parameter loss insensitivity 1 - |g_i| / max|g|, the max taken per
// layer (or globally with global_max). Layers whose gradients are all zero
// get 1.0 everywhere; otherwise the max-magnitude entry gets exactly 0.
std::vector<double> insensitivity(const ParamStore& store, std::span<const double> loss_grads,
                                  bool global_max = false);

// Combined regularization direction, flat-aligned:
//   u_i = insensitivity_i * (lambda_h * dH_n/dw_i + lambda_e * dE/dw_i)
// The caller adds this to the loss gradient before the SGD step.
std::vector<double> regularization_update(const ParamStore& store,
                                          const std::vector<Codebook>& codebooks,
                                          const TupleView& view, const IndexMap& indices,
                                          std::span<const double> loss_grads,
                                          const RegConfig& cfg, EvalStats* stats = nullptr,
                                          int threads = 1);

}  // namespace hemp
