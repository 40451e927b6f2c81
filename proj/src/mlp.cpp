#include "hemp/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hemp {

MlpSpec MlpSpec::parse(const std::string& s) {
  MlpSpec spec;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find('x', pos);
    if (next == std::string::npos) next = s.size();
    int w = 0;
    try {
      w = std::stoi(s.substr(pos, next - pos));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad architecture string: " + s);
    }
    if (w <= 0) throw std::invalid_argument("architecture widths must be positive: " + s);
    spec.widths.push_back(w);
    pos = next + 1;
  }
  if (spec.widths.size() < 2) throw std::invalid_argument("architecture needs >= 2 widths: " + s);
  return spec;
}

std::string MlpSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(widths[i]);
  }
  return out;
}

MlpSpec spec_from_store(const ParamStore& store) {
  MlpSpec spec;
  for (const auto& l : store.layers()) {
    if (l.name.size() > 7 && l.name.substr(l.name.size() - 7) == ".weight") {
      if (l.shape.size() != 2) throw std::invalid_argument("weight layer must be 2-D");
      if (spec.widths.empty()) spec.widths.push_back(l.shape[1]);
      spec.widths.push_back(l.shape[0]);
    }
  }
  if (spec.widths.size() < 2) throw std::invalid_argument("store has no fc weight layers");
  return spec;
}

Mlp::Mlp(MlpSpec spec, const Rng& init_rng, bool biases_in_store)
    : spec_(std::move(spec)), biases_in_store_(biases_in_store) {
  if (spec_.widths.size() < 2) throw std::invalid_argument("architecture needs >= 2 widths");
  int layers = static_cast<int>(spec_.widths.size()) - 1;
  for (int k = 0; k < layers; ++k) {
    int in = spec_.widths[static_cast<std::size_t>(k)];
    int out = spec_.widths[static_cast<std::size_t>(k) + 1];
    Rng r = init_rng.fork("init.fc", static_cast<std::uint64_t>(k));
    // He for the ReLU layers, Xavier-ish for the linear head
    double scale = (k + 1 < layers) ? std::sqrt(2.0 / in) : std::sqrt(1.0 / in);
    std::vector<double> w(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    for (double& v : w) v = scale * r.normal();
    store_.add_layer("fc" + std::to_string(k) + ".weight", {out, in}, std::move(w));
    if (biases_in_store_) {
      store_.add_layer("fc" + std::to_string(k) + ".bias", {out});
    } else {
      side_bias_.emplace_back(static_cast<std::size_t>(out), 0.0);
      side_bias_vel_.emplace_back(static_cast<std::size_t>(out), 0.0);
      side_bias_grad_.emplace_back(static_cast<std::size_t>(out), 0.0);
    }
  }
}

void Mlp::set_side_biases(std::vector<std::vector<double>> b) {
  if (biases_in_store_) throw std::logic_error("biases live in the store");
  if (b.size() != side_bias_.size()) throw std::invalid_argument("bias layer count mismatch");
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (b[k].size() != side_bias_[k].size()) throw std::invalid_argument("bias width mismatch");
  }
  side_bias_ = std::move(b);
}

double Mlp::forward_backward(const Dataset& ds, std::span<const std::size_t> batch,
                             std::vector<double>& grad_out) {
  const int layers = static_cast<int>(spec_.widths.size()) - 1;
  const std::size_t bsz = batch.size();
  if (bsz == 0) throw std::invalid_argument("empty batch");
  if (static_cast<int>(ds.dim()) != spec_.inputs()) {
    throw std::invalid_argument("dataset dim does not match architecture input");
  }

  // forward, keeping every activation for the backward sweep
  std::vector<std::vector<double>> acts(static_cast<std::size_t>(layers) + 1);
  acts[0].resize(bsz * static_cast<std::size_t>(spec_.inputs()));
  for (std::size_t b = 0; b < bsz; ++b) {
    const float* img = ds.image(batch[b]);
    for (int i = 0; i < spec_.inputs(); ++i) {
      acts[0][b * static_cast<std::size_t>(spec_.inputs()) + static_cast<std::size_t>(i)] = img[i];
    }
  }
  for (int k = 0; k < layers; ++k) {
    const int in = spec_.widths[static_cast<std::size_t>(k)];
    const int out = spec_.widths[static_cast<std::size_t>(k) + 1];
    const auto& w = store_.layer(weight_layer(k)).values;
    const double* bias = biases_in_store_ ? store_.layer(bias_layer(k)).values.data()
                                          : side_bias_[static_cast<std::size_t>(k)].data();
    auto& z = acts[static_cast<std::size_t>(k) + 1];
    z.assign(bsz * static_cast<std::size_t>(out), 0.0);
    const auto& a = acts[static_cast<std::size_t>(k)];
    for (std::size_t b = 0; b < bsz; ++b) {
      const double* ab = &a[b * static_cast<std::size_t>(in)];
      double* zb = &z[b * static_cast<std::size_t>(out)];
      for (int o = 0; o < out; ++o) {
        const double* wo = &w[static_cast<std::size_t>(o) * static_cast<std::size_t>(in)];
        double acc = bias[o];
        for (int i = 0; i < in; ++i) acc += wo[i] * ab[static_cast<std::size_t>(i)];
        zb[o] = acc;
      }
      if (k + 1 < layers) {
        for (int o = 0; o < out; ++o) zb[o] = std::max(zb[o], 0.0);  // ReLU
      }
    }
  }

  // softmax cross-entropy on the logits (nats)
  const int classes = spec_.outputs();
  auto& logits = acts[static_cast<std::size_t>(layers)];
  std::vector<double> delta(bsz * static_cast<std::size_t>(classes));
  double loss = 0.0;
  for (std::size_t b = 0; b < bsz; ++b) {
    double* zb = &logits[b * static_cast<std::size_t>(classes)];
    double m = zb[0];
    for (int o = 1; o < classes; ++o) m = std::max(m, zb[o]);
    double sum = 0.0;
    for (int o = 0; o < classes; ++o) sum += std::exp(zb[o] - m);
    double lse = m + std::log(sum);
    int y = ds.labels[batch[b]];
    if (y < 0 || y >= classes) throw std::invalid_argument("label outside class range");
    loss += lse - zb[y];
    for (int o = 0; o < classes; ++o) {
      double p = std::exp(zb[o] - lse);
      delta[b * static_cast<std::size_t>(classes) + static_cast<std::size_t>(o)] =
          (p - (o == y ? 1.0 : 0.0)) / static_cast<double>(bsz);
    }
  }
  loss /= static_cast<double>(bsz);

  // backward
  grad_out.assign(store_.total_count(), 0.0);
  std::vector<double> next_delta;
  for (int k = layers - 1; k >= 0; --k) {
    const int in = spec_.widths[static_cast<std::size_t>(k)];
    const int out = spec_.widths[static_cast<std::size_t>(k) + 1];
    const auto& a = acts[static_cast<std::size_t>(k)];
    const auto& w = store_.layer(weight_layer(k)).values;
    double* gw = grad_out.data() + store_.flat_base(weight_layer(k));
    double* gb = nullptr;
    if (biases_in_store_) {
      gb = grad_out.data() + store_.flat_base(bias_layer(k));
    } else {
      auto& side = side_bias_grad_[static_cast<std::size_t>(k)];
      std::fill(side.begin(), side.end(), 0.0);
      gb = side.data();
    }
    if (k > 0) next_delta.assign(bsz * static_cast<std::size_t>(in), 0.0);
    for (std::size_t b = 0; b < bsz; ++b) {
      const double* db = &delta[b * static_cast<std::size_t>(out)];
      const double* ab = &a[b * static_cast<std::size_t>(in)];
      for (int o = 0; o < out; ++o) {
        double d = db[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwo = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
        for (int i = 0; i < in; ++i) gwo[i] += d * ab[static_cast<std::size_t>(i)];
      }
      if (k > 0) {
        double* nd = &next_delta[b * static_cast<std::size_t>(in)];
        for (int o = 0; o < out; ++o) {
          double d = db[o];
          if (d == 0.0) continue;
          const double* wo = &w[static_cast<std::size_t>(o) * static_cast<std::size_t>(in)];
          for (int i = 0; i < in; ++i) nd[i] += d * wo[i];
        }
        // ReLU mask: activations of layer k are post-ReLU
        for (int i = 0; i < in; ++i) {
          if (ab[static_cast<std::size_t>(i)] <= 0.0) nd[i] = 0.0;
        }
      }
    }
    if (k > 0) delta = next_delta;
  }
  return loss;
}

void Mlp::step_side_biases(double lr, double momentum) {
  if (biases_in_store_) return;
  for (std::size_t k = 0; k < side_bias_.size(); ++k) {
    for (std::size_t i = 0; i < side_bias_[k].size(); ++i) {
      side_bias_vel_[k][i] = momentum * side_bias_vel_[k][i] + side_bias_grad_[k][i];
      side_bias_[k][i] -= lr * side_bias_vel_[k][i];
    }
  }
}

namespace {

EvalResult eval_core(const std::vector<int>& widths, const std::vector<const double*>& weights,
                     const std::vector<const double*>& biases, const Dataset& ds) {
  const int layers = static_cast<int>(widths.size()) - 1;
  if (static_cast<int>(ds.dim()) != widths.front()) {
    throw std::invalid_argument("dataset dim does not match architecture input");
  }
  const int classes = widths.back();
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<double> a, z;
  for (std::size_t s = 0; s < ds.count(); ++s) {
    const float* img = ds.image(s);
    a.assign(img, img + ds.dim());
    for (int k = 0; k < layers; ++k) {
      const int in = widths[static_cast<std::size_t>(k)];
      const int out = widths[static_cast<std::size_t>(k) + 1];
      const double* w = weights[static_cast<std::size_t>(k)];
      const double* bias = biases[static_cast<std::size_t>(k)];  // may be null
      z.assign(static_cast<std::size_t>(out), 0.0);
      for (int o = 0; o < out; ++o) {
        const double* wo = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
        double acc = bias ? bias[o] : 0.0;
        for (int i = 0; i < in; ++i) acc += wo[i] * a[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(o)] = (k + 1 < layers) ? std::max(acc, 0.0) : acc;
      }
      a = z;
    }
    double m = a[0];
    int arg = 0;
    for (int o = 1; o < classes; ++o) {
      if (a[static_cast<std::size_t>(o)] > m) {
        m = a[static_cast<std::size_t>(o)];
        arg = o;
      }
    }
    double sum = 0.0;
    for (int o = 0; o < classes; ++o) sum += std::exp(a[static_cast<std::size_t>(o)] - m);
    int y = ds.labels[s];
    if (y < 0 || y >= classes) throw std::invalid_argument("label outside class range");
    loss += m + std::log(sum) - a[static_cast<std::size_t>(y)];
    if (arg == y) ++correct;
  }
  EvalResult r;
  r.loss = loss / static_cast<double>(ds.count());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(ds.count());
  return r;
}

}  // namespace

EvalResult Mlp::evaluate(const Dataset& ds) const { return evaluate_impl(ds, store_); }

EvalResult Mlp::evaluate(const Dataset& ds, const ParamStore& weights) const {
  return evaluate_impl(ds, weights);
}

EvalResult Mlp::evaluate_impl(const Dataset& ds, const ParamStore& weights) const {
  const int layers = static_cast<int>(spec_.widths.size()) - 1;
  std::vector<const double*> w, b;
  for (int k = 0; k < layers; ++k) {
    w.push_back(weights.layer(weight_layer(k)).values.data());
    b.push_back(biases_in_store_ ? weights.layer(bias_layer(k)).values.data()
                                 : side_bias_[static_cast<std::size_t>(k)].data());
  }
  return eval_core(spec_.widths, w, b, ds);
}

EvalResult evaluate_store(const ParamStore& store, const Dataset& ds) {
  MlpSpec spec = spec_from_store(store);
  const int layers = static_cast<int>(spec.widths.size()) - 1;
  std::vector<const double*> w(static_cast<std::size_t>(layers), nullptr);
  std::vector<const double*> b(static_cast<std::size_t>(layers), nullptr);
  int weight_seen = 0;
  for (const auto& l : store.layers()) {
    if (l.name.size() > 7 && l.name.substr(l.name.size() - 7) == ".weight") {
      w[static_cast<std::size_t>(weight_seen++)] = l.values.data();
    }
  }
  for (int k = 0; k < layers; ++k) {
    std::string bias_name = "fc" + std::to_string(k) + ".bias";
    for (const auto& l : store.layers()) {
      if (l.name == bias_name) {
        if (static_cast<int>(l.count()) != spec.widths[static_cast<std::size_t>(k) + 1]) {
          throw std::invalid_argument("bias width mismatch for " + bias_name);
        }
        b[static_cast<std::size_t>(k)] = l.values.data();
      }
    }
  }
  return eval_core(spec.widths, w, b, ds);
}

}  // namespace hemp
