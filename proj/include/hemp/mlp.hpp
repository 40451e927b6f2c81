#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hemp/dataset.hpp"
#include "hemp/param_store.hpp"
#include "hemp/rng.hpp"

namespace hemp {

struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output

  static MlpSpec parse(const std::string& s);  // "784x32x10"
  std::string to_string() const;
  int inputs() const { return widths.front(); }
  int outputs() const { return widths.back(); }
};

// Derives the layer widths back from a store laid out by Mlp (fc{k}.weight
// shapes), with or without bias layers present.
MlpSpec spec_from_store(const ParamStore& store);

struct EvalResult {
  double loss = 0.0;      // mean cross-entropy, nats
  double accuracy = 0.0;  // top-1
};

// Forward evaluation straight off a store, resolving fc{k}.weight /
// fc{k}.bias by name (missing biases count as zeros). Layer order in the
// store does not matter. Used for checkpoint/container inputs.
EvalResult evaluate_store(const ParamStore& store, const Dataset& ds);

// Dense ReLU net with a softmax cross-entropy head. All weights live in a
// ParamStore (fc{k}.weight rows = output units, then fc{k}.bias), which is
// what the quantization/entropy side consumes. With biases_in_store=false
// the biases stay outside the store (exempt from quantization) and are
// updated here instead.
class Mlp {
 public:
  Mlp(MlpSpec spec, const Rng& init_rng, bool biases_in_store = true);

  const MlpSpec& spec() const { return spec_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  bool biases_in_store() const { return biases_in_store_; }

  // Mean cross-entropy over the batch plus flat parameter gradients
  // (store-aligned). Exempt-bias gradients are accumulated internally and
  // applied by step_side_biases.
  double forward_backward(const Dataset& ds, std::span<const std::size_t> batch,
                          std::vector<double>& grad_out);

  // SGD-with-momentum step for exempt biases; no-op when biases are stored.
  void step_side_biases(double lr, double momentum);

  EvalResult evaluate(const Dataset& ds) const;
  // same net shape, different parameter values (e.g. quantized weights);
  // exempt biases still come from this model
  EvalResult evaluate(const Dataset& ds, const ParamStore& weights) const;

  const std::vector<std::vector<double>>& side_biases() const { return side_bias_; }
  void set_side_biases(std::vector<std::vector<double>> b);

 private:
  int weight_layer(int k) const { return biases_in_store_ ? 2 * k : k; }
  int bias_layer(int k) const { return 2 * k + 1; }
  EvalResult evaluate_impl(const Dataset& ds, const ParamStore& weights) const;

  MlpSpec spec_;
  ParamStore store_;
  bool biases_in_store_;
  std::vector<std::vector<double>> side_bias_, side_bias_vel_, side_bias_grad_;
};

}  // namespace hemp
