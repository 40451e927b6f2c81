#include "hemp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "hemp/entropy.hpp"
#include "hemp/errors.hpp"

namespace hemp {

namespace {

void sgd_step(ParamStore& store, std::span<const double> grads, double lr, double momentum) {
  for (auto layer_id = 0; layer_id < static_cast<int>(store.layer_count()); ++layer_id) {
    auto& l = store.layer(layer_id);
    const double* g = grads.data() + store.flat_base(layer_id);
    for (std::size_t i = 0; i < l.count(); ++i) {
      l.momentum_buffer[i] = momentum * l.momentum_buffer[i] + g[i];
      l.values[i] -= lr * l.momentum_buffer[i];
    }
  }
}

// weight-layer fits; bias layers reuse their weight layer's levels
std::vector<Codebook> fit_codebooks(const ParamStore& store, int levels, bool biases_in_store,
                                    const std::vector<Codebook>* previous) {
  std::vector<Codebook> out(store.layer_count());
  int stride = biases_in_store ? 2 : 1;
  for (int id = 0; id < static_cast<int>(store.layer_count()); id += stride) {
    const std::vector<double>* warm = nullptr;
    if (previous && !(*previous)[static_cast<std::size_t>(id)].levels.empty()) {
      warm = &(*previous)[static_cast<std::size_t>(id)].levels;
    }
    Codebook cb = fit_lloyd_max(store.layer(id).values, levels, {}, warm);
    cb.layer_id = id;
    out[static_cast<std::size_t>(id)] = cb;
    if (biases_in_store) {
      Codebook bias_cb = out[static_cast<std::size_t>(id)];
      bias_cb.layer_id = id + 1;
      out[static_cast<std::size_t>(id) + 1] = std::move(bias_cb);
    }
  }
  return out;
}

ModelArchive::Layer identity_layer(const std::string& name, int width,
                                   const std::vector<double>& values) {
  ModelArchive::Layer l;
  l.name = name;
  l.shape = {static_cast<std::uint32_t>(width)};
  std::vector<float> v32(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v32[i] = static_cast<float>(values[i]);
  std::vector<float> lv = v32;
  std::sort(lv.begin(), lv.end());
  lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
  l.levels = lv;
  l.indices.resize(v32.size());
  for (std::size_t i = 0; i < v32.size(); ++i) {
    auto it = std::lower_bound(lv.begin(), lv.end(), v32[i]);
    l.indices[i] = static_cast<std::int32_t>(it - lv.begin()) + 1;
  }
  return l;
}

std::uint64_t estimate_bytes(const ModelArchive& archive, const TupleView& view, double h_true,
                             const std::vector<Codebook>& codebooks) {
  double bits = h_true * static_cast<double>(view.tuple_count);
  int max_n = 2;
  for (const auto& cb : codebooks) max_n = std::max(max_n, cb.level_count());
  bits += static_cast<double>(view.remainder.size()) * std::log2(static_cast<double>(max_n));
  return static_cast<std::uint64_t>(header_bytes(archive)) +
         static_cast<std::uint64_t>(std::ceil(bits / 8.0));
}

}  // namespace

ModelArchive TrainResult::to_archive(int order) const {
  ModelArchive a = make_archive(model.store(), codebooks, indices, order);
  if (!model.biases_in_store()) {
    // exempt biases ride along losslessly (to float32) as identity codebooks
    const auto& biases = model.side_biases();
    for (std::size_t k = 0; k < biases.size(); ++k) {
      a.layers.push_back(identity_layer("fc" + std::to_string(k) + ".bias",
                                        static_cast<int>(biases[k].size()), biases[k]));
    }
  }
  return a;
}

ParamStore TrainResult::full_store() const {
  const ParamStore& src = model.store();
  if (model.biases_in_store()) return src;
  ParamStore out;
  const auto& biases = model.side_biases();
  for (std::size_t k = 0; k < src.layers().size(); ++k) {
    const auto& l = src.layer(static_cast<int>(k));
    out.add_layer(l.name, l.shape, l.values);
    out.add_layer("fc" + std::to_string(k) + ".bias", {static_cast<int>(biases[k].size())},
                  biases[k]);
  }
  return out;
}

EvalResult TrainResult::eval_continuous(const Dataset& ds) const { return model.evaluate(ds); }

EvalResult TrainResult::eval_quantized(const Dataset& ds) const {
  return model.evaluate(ds, reconstruct_store(model.store(), codebooks, indices));
}

TrainResult train(const MlpSpec& arch, const Dataset& train_ds, const Dataset& test_ds,
                  const TrainConfig& cfg) {
  if (train_ds.count() == 0 || test_ds.count() == 0) throw std::invalid_argument("empty dataset");
  if (cfg.lr <= 0.0) throw std::invalid_argument("lr must be > 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw std::invalid_argument("momentum in [0,1)");
  if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.refit_every < 1) {
    throw std::invalid_argument("batch_size, epochs, refit_every must be >= 1");
  }
  if (cfg.levels < 2) throw std::invalid_argument("levels must be >= 2");
  if (cfg.reg.order < 1) throw std::invalid_argument("order must be >= 1");
  if (static_cast<int>(train_ds.dim()) != arch.inputs()) {
    throw std::invalid_argument("architecture input does not match dataset");
  }
  if (train_ds.num_classes > arch.outputs()) {
    throw std::invalid_argument("architecture output smaller than class count");
  }

  Rng root(cfg.seed);
  TrainResult result{Mlp(arch, root.fork("init"), cfg.quantize_biases), {}, {}, {}};
  Mlp& m = result.model;
  ParamStore& store = m.store();
  TupleView view = group_tuples(store, cfg.reg.order);
  const bool reg_active = cfg.reg.lambda_h != 0.0 || cfg.reg.lambda_e != 0.0;

  std::vector<Codebook> codebooks = fit_codebooks(store, cfg.levels, cfg.quantize_biases, nullptr);

  auto log_epoch = [&](int epoch) {
    EpochMetrics em;
    em.epoch = epoch;
    IndexMap indices = quantize_store(store, codebooks);
    ParamStore recon = reconstruct_store(store, codebooks, indices);
    EvalResult tr = m.evaluate(train_ds);
    EvalResult te = m.evaluate(test_ds);
    EvalResult tr_q = m.evaluate(train_ds, recon);
    EvalResult te_q = m.evaluate(test_ds, recon);
    em.loss_w = tr.loss;
    em.loss_wq = tr_q.loss;
    em.acc_w = te.accuracy;
    em.acc_wq = te_q.accuracy;
    EntropyReport rep = entropy_report(store, codebooks, indices, view, cfg.threads);
    em.h_proxy = rep.h_proxy;
    em.h_true = rep.h_true;
    em.e_term = reconstruction_error(store, codebooks, indices);
    result.codebooks = codebooks;
    result.indices = indices;
    em.est_bytes = estimate_bytes(result.to_archive(cfg.reg.order), view, rep.h_true, codebooks);
    if (!std::isfinite(em.loss_w) || !std::isfinite(em.h_proxy) || !std::isfinite(em.e_term)) {
      throw DivergenceError("non-finite metrics at epoch " + std::to_string(epoch));
    }
    if (em.loss_w > cfg.divergence_limit) {
      throw DivergenceError("training loss " + std::to_string(em.loss_w) + " passed the abort limit");
    }
    result.history.push_back(em);
  };

  log_epoch(0);

  std::vector<std::size_t> order_ids(train_ds.count());
  std::iota(order_ids.begin(), order_ids.end(), std::size_t{0});
  std::vector<double> grads;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.fork("shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order_ids);
    for (std::size_t start = 0; start < order_ids.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size),
                                 order_ids.size() - start);
      std::span<const std::size_t> batch(order_ids.data() + start, len);
      double loss = m.forward_backward(train_ds, batch, grads);
      if (!std::isfinite(loss) || loss > cfg.divergence_limit) {
        throw DivergenceError("batch loss " + std::to_string(loss) + " passed the abort limit");
      }
      if (reg_active) {
        IndexMap idx = quantize_store(store, codebooks);
        auto reg = regularization_update(store, codebooks, view, idx, grads, cfg.reg, nullptr,
                                         cfg.threads);
        for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += reg[i];
      }
      sgd_step(store, grads, cfg.lr, cfg.momentum);
      m.step_side_biases(cfg.lr, cfg.momentum);
    }
    if (epoch % cfg.refit_every == 0) {
      codebooks = fit_codebooks(store, cfg.levels, cfg.quantize_biases, &codebooks);
    }
    log_epoch(epoch);
  }
  return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(DataError::Kind::io, "cannot write " + path);
  out << "epoch,loss_w,loss_wq,acc_w,acc_wq,h_proxy,h_true,e_term,est_bytes\n";
  out << std::setprecision(10);
  for (const auto& em : history) {
    out << em.epoch << ',' << em.loss_w << ',' << em.loss_wq << ',' << em.acc_w << ','
        << em.acc_wq << ',' << em.h_proxy << ',' << em.h_true << ',' << em.e_term << ','
        << em.est_bytes << '\n';
  }
  if (!out) throw DataError(DataError::Kind::io, "short write to " + path);
}

}  // namespace hemp
