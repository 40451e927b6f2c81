#include "hemp/regularizer.hpp"

#include <cmath>
#include <stdexcept>

namespace hemp {

namespace {

// squared distances to assigned levels, flat-aligned
std::vector<double> residuals(const ParamStore& store, const std::vector<Codebook>& codebooks,
                              const IndexMap& indices) {
  if (codebooks.size() != store.layer_count() || indices.layers.size() != store.layer_count()) {
    throw std::invalid_argument("layer count mismatch");
  }
  std::vector<double> out;
  out.reserve(store.total_count());
  for (std::size_t l = 0; l < store.layer_count(); ++l) {
    const auto& layer = store.layer(static_cast<int>(l));
    const auto& idx = indices.layers[l];
    if (idx.size() != layer.count()) throw std::invalid_argument("index count mismatch");
    const auto& lv = codebooks[l].levels;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::int32_t q = idx[i];
      if (q < 1 || q > static_cast<std::int32_t>(lv.size())) {
        throw std::out_of_range("quantization index outside [1, N]");
      }
      out.push_back(layer.values[i] - lv[static_cast<std::size_t>(q - 1)]);
    }
  }
  return out;
}

}  // namespace

double reconstruction_error(const ParamStore& store, const std::vector<Codebook>& codebooks,
                            const IndexMap& indices) {
  auto r = residuals(store, codebooks, indices);
  if (r.empty()) throw std::invalid_argument("empty store");
  double acc = 0.0;
  for (double d : r) acc += d * d;
  return std::sqrt(acc / static_cast<double>(r.size()));
}

std::vector<double> reconstruction_gradient(const ParamStore& store,
                                            const std::vector<Codebook>& codebooks,
                                            const IndexMap& indices) {
  auto r = residuals(store, codebooks, indices);
  if (r.empty()) throw std::invalid_argument("empty store");
  double acc = 0.0;
  for (double d : r) acc += d * d;
  double count = static_cast<double>(r.size());
  double e = std::sqrt(acc / count);
  if (e == 0.0) {
    return std::vector<double>(r.size(), 0.0);  // already on the levels
  }
  for (double& d : r) d /= count * e;
  return r;
}

std::vector<double> insensitivity(const ParamStore& store, std::span<const double> loss_grads,
                                  bool global_max) {
  if (loss_grads.size() != store.total_count()) {
    throw std::invalid_argument("gradient count mismatch");
  }
  std::vector<double> out(loss_grads.size(), 1.0);
  auto apply = [&](std::size_t lo, std::size_t hi) {
    double mx = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mx = std::max(mx, std::abs(loss_grads[i]));
    if (mx == 0.0) return;  // untouched block keeps full step
    for (std::size_t i = lo; i < hi; ++i) out[i] = 1.0 - std::abs(loss_grads[i]) / mx;
  };
  if (global_max) {
    apply(0, loss_grads.size());
  } else {
    for (std::size_t l = 0; l < store.layer_count(); ++l) {
      std::size_t lo = store.flat_base(static_cast<int>(l));
      apply(lo, lo + store.layer(static_cast<int>(l)).count());
    }
  }
  return out;
}

std::vector<double> regularization_update(const ParamStore& store,
                                          const std::vector<Codebook>& codebooks,
                                          const TupleView& view, const IndexMap& indices,
                                          std::span<const double> loss_grads,
                                          const RegConfig& cfg, EvalStats* stats, int threads) {
  std::vector<double> update(store.total_count(), 0.0);
  if (cfg.lambda_h != 0.0) {
    auto gh = proxy_gradient(store, codebooks, view, stats, threads);
    for (std::size_t i = 0; i < update.size(); ++i) update[i] += cfg.lambda_h * gh[i];
  }
  if (cfg.lambda_e != 0.0) {
    auto ge = reconstruction_gradient(store, codebooks, indices);
    for (std::size_t i = 0; i < update.size(); ++i) update[i] += cfg.lambda_e * ge[i];
  }
  if (cfg.insensitivity) {
    auto s = insensitivity(store, loss_grads, cfg.global_max);
    for (std::size_t i = 0; i < update.size(); ++i) update[i] *= s[i];
  }
  return update;
}

}  // namespace hemp
