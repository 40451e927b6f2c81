#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hemp/codec.hpp"
#include "hemp/dataset.hpp"
#include "hemp/lloyd.hpp"
#include "hemp/mlp.hpp"
#include "hemp/regularizer.hpp"

namespace hemp {

struct TrainConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  int batch_size = 100;
  int epochs = 30;
  std::uint64_t seed = 1;
  int levels = 4;  // codebook size N
  RegConfig reg;
  int refit_every = 1;          // epochs between Lloyd-Max refits
  bool quantize_biases = true;  // false exempts biases from the store/entropy
  int threads = 1;
  double divergence_limit = 1e3;
};

struct EpochMetrics {
  int epoch = 0;         // 0 is the pre-training state
  double loss_w = 0.0;   // train loss, continuous weights (nats)
  double loss_wq = 0.0;  // train loss, quantized weights
  double acc_w = 0.0;    // test top-1, continuous
  double acc_wq = 0.0;   // test top-1, quantized
  double h_proxy = 0.0;  // H_n, bits per tuple
  double h_true = 0.0;   // plug-in entropy of the index stream, bits per tuple
  double e_term = 0.0;   // RMS reconstruction error
  std::uint64_t est_bytes = 0;
};

struct TrainResult {
  Mlp model;
  std::vector<Codebook> codebooks;  // weight-layer fits (biases share them)
  IndexMap indices;
  std::vector<EpochMetrics> history;

  ModelArchive to_archive(int order) const;
  EvalResult eval_continuous(const Dataset& ds) const;
  EvalResult eval_quantized(const Dataset& ds) const;
  // continuous weights plus biases as one store, for checkpointing
  ParamStore full_store() const;
};

// Twin-parameter loop: per batch, loss gradients on the continuous weights,
// quantization against the current codebooks, entropy+reconstruction
// regularization toward them, one SGD-momentum step on the sum. Codebooks
// refit (warm-started) every refit_every epochs. history[0] is the state
// before any step; one row per epoch after that. Deterministic for a fixed
// seed when cfg.threads == 1. Throws DivergenceError when the batch loss
// passes cfg.divergence_limit.
TrainResult train(const MlpSpec& arch, const Dataset& train_ds, const Dataset& test_ds,
                  const TrainConfig& cfg);

void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::string& path);

}  // namespace hemp
