// hemp: train/compress/decompress/eval/diagnose for entropy-regularized
// quantized models. Exit codes: 0 ok, 2 usage, 3 data/format, 4 divergence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "hemp/codec.hpp"
#include "hemp/dataset.hpp"
#include "hemp/entropy.hpp"
#include "hemp/errors.hpp"
#include "hemp/lloyd.hpp"
#include "hemp/mlp.hpp"
#include "hemp/param_store.hpp"
#include "hemp/rng.hpp"
#include "hemp/trainer.hpp"

namespace {

struct DataOpts {
  std::string dataset = "digits";  // mnist | digits | synth
  std::string data_dir;            // mnist root; falls back to HEMP_DATA_DIR
  int train_count = 2000;
  int test_count = 1000;
};

void add_data_flags(CLI::App* sub, DataOpts& d) {
  sub->add_option("--dataset", d.dataset, "mnist | digits | synth")
      ->check(CLI::IsMember({"mnist", "digits", "synth"}));
  sub->add_option("--data-dir", d.data_dir, "IDX dataset root (default $HEMP_DATA_DIR)");
  sub->add_option("--train-count", d.train_count, "training samples (0 = all, mnist only)")
      ->check(CLI::Range(0, 1 << 20));
  sub->add_option("--test-count", d.test_count, "test samples (0 = all, mnist only)")
      ->check(CLI::Range(0, 1 << 20));
}

std::string idx_dir(const DataOpts& d) {
  if (!d.data_dir.empty()) return d.data_dir;
  if (const char* env = std::getenv("HEMP_DATA_DIR")) return env;
  throw hemp::DataError(hemp::DataError::Kind::io,
                        "dataset root not set; pass --data-dir or set HEMP_DATA_DIR");
}

hemp::Dataset maybe_subset(hemp::Dataset ds, int count, const hemp::Rng& rng) {
  if (count <= 0 || static_cast<std::size_t>(count) >= ds.count()) return ds;
  return hemp::stratified_subset(ds, static_cast<std::size_t>(count), rng);
}

// train/test pair per the dataset flags; input_dim/classes only matter for synth
std::pair<hemp::Dataset, hemp::Dataset> resolve_datasets(const DataOpts& d, int input_dim,
                                                         int classes, std::uint64_t seed) {
  hemp::Rng root(seed);
  if (d.dataset == "mnist") {
    std::string dir = idx_dir(d);
    hemp::Dataset tr = hemp::load_idx(dir + "/train-images-idx3-ubyte",
                                      dir + "/train-labels-idx1-ubyte");
    hemp::Dataset te = hemp::load_idx(dir + "/t10k-images-idx3-ubyte",
                                      dir + "/t10k-labels-idx1-ubyte");
    return {maybe_subset(std::move(tr), d.train_count, root.fork("subset.train")),
            maybe_subset(std::move(te), d.test_count, root.fork("subset.test"))};
  }
  if (d.train_count <= 0 || d.test_count <= 0) {
    throw std::invalid_argument("--train-count/--test-count must be positive for " + d.dataset);
  }
  if (d.dataset == "digits") {
    int per_tr = (d.train_count + 9) / 10;
    int per_te = (d.test_count + 9) / 10;
    hemp::Dataset tr = hemp::synth_digits(per_tr, root.fork("digits.train").next_u64());
    hemp::Dataset te = hemp::synth_digits(per_te, root.fork("digits.test").next_u64());
    return {maybe_subset(std::move(tr), d.train_count, root.fork("subset.train")),
            maybe_subset(std::move(te), d.test_count, root.fork("subset.test"))};
  }
  // synth: gaussian blobs matched to the architecture. One generation with a
  // disjoint split: the class centers are seed-dependent, so train and test
  // have to come from the same draw.
  int total = d.train_count + d.test_count;
  int per_class = (total + classes - 1) / classes;
  hemp::Dataset all = hemp::synth_gaussian_blobs(classes, per_class, input_dim,
                                                 root.fork("blobs").next_u64());
  auto [tr, rest] = hemp::stratified_split(all, static_cast<std::size_t>(d.train_count),
                                           root.fork("split"));
  return {std::move(tr), maybe_subset(std::move(rest), d.test_count, root.fork("subset.test"))};
}

// model file loader shared by eval/diagnose: container or checkpoint,
// decided by magic
struct LoadedModel {
  hemp::ParamStore store;
  std::vector<hemp::Codebook> codebooks;  // empty for checkpoints
  std::size_t file_bytes = 0;
  bool quantized = false;
};

LoadedModel load_model_file(const std::string& path) {
  std::vector<std::uint8_t> bytes = hemp::read_file(path);
  LoadedModel m;
  m.file_bytes = bytes.size();
  if (bytes.size() >= 4 && bytes[0] == 'H' && bytes[1] == 'E' && bytes[2] == 'M' &&
      bytes[3] == 'P') {
    hemp::ModelArchive a = hemp::decode(bytes);
    auto restored = hemp::restore_store(a);
    m.store = std::move(restored.first);
    m.codebooks = std::move(restored.second);
    m.quantized = true;
  } else {
    m.store = hemp::load_checkpoint(path);
  }
  return m;
}

struct TrainFlags {
  DataOpts data;
  std::string arch = "784x32x10";
  std::string out = "model.hemp";
  std::string metrics = "metrics.csv";
  std::string checkpoint_out;
  std::string config;
  hemp::TrainConfig cfg;
  bool no_insensitivity = false;
  bool exempt_biases = false;
  bool deterministic = false;
};

// CLI11 parses but never reads a set_config attached to a plain subcommand,
// so config files are folded in by hand after the main parse. parse_from_stream
// only fills options that are still empty, which gives flags precedence.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in.good()) throw CLI::FileError::Missing(path);
  sub->parse_from_stream(in);
}

void add_config_flag(CLI::App* sub, std::string& path) {
  sub->add_option("--config", path, "key = value file; command-line flags win")
      ->configurable(false);
}

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  add_data_flags(sub, f.data);
  sub->add_option("--arch", f.arch, "layer widths, e.g. 784x32x10");
  sub->add_option("--levels", f.cfg.levels, "codebook size per layer")
      ->check(CLI::Range(2, 65535));
  sub->add_option("--order", f.cfg.reg.order, "entropy tuple order n")
      ->check(CLI::Range(1, hemp::kMaxOrder));
  sub->add_option("--lambda-h", f.cfg.reg.lambda_h, "entropy term weight");
  sub->add_option("--lambda-e", f.cfg.reg.lambda_e, "reconstruction term weight");
  sub->add_option("--lr", f.cfg.lr, "learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--momentum", f.cfg.momentum, "SGD momentum")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--batch", f.cfg.batch_size, "minibatch size")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", f.cfg.epochs, "training epochs")->check(CLI::Range(1, 100000));
  sub->add_option("--seed", f.cfg.seed, "master RNG seed");
  sub->add_option("--refit-every", f.cfg.refit_every, "epochs between codebook refits")
      ->check(CLI::PositiveNumber);
  sub->add_option("--divergence-limit", f.cfg.divergence_limit, "abort when batch loss passes this")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--no-insensitivity", f.no_insensitivity,
                "drop the per-parameter loss-sensitivity scaling");
  sub->add_flag("--global-max", f.cfg.reg.global_max,
                "insensitivity max over the whole net instead of per layer");
  sub->add_flag("--exempt-biases", f.exempt_biases,
                "keep biases out of quantization and the entropy term");
  sub->add_option("--threads", f.cfg.threads, "entropy evaluation workers")
      ->check(CLI::Range(1, 256));
  sub->add_flag("--deterministic", f.deterministic, "force sequential reductions");
  sub->add_option("--out", f.out, "output container path");
  sub->add_option("--metrics", f.metrics, "per-epoch CSV path");
  sub->add_option("--checkpoint-out", f.checkpoint_out, "also save continuous weights");
}

int run_train(const TrainFlags& f) {
  hemp::TrainConfig cfg = f.cfg;
  cfg.reg.insensitivity = !f.no_insensitivity;
  cfg.quantize_biases = !f.exempt_biases;
  if (f.deterministic) cfg.threads = 1;

  hemp::MlpSpec arch = hemp::MlpSpec::parse(f.arch);
  auto [train_ds, test_ds] = resolve_datasets(f.data, arch.inputs(), arch.outputs(), cfg.seed);
  std::cout << "dataset " << f.data.dataset << ": " << train_ds.count() << " train / "
            << test_ds.count() << " test\n";

  hemp::TrainResult result = hemp::train(arch, train_ds, test_ds, cfg);

  hemp::ModelArchive archive = result.to_archive(cfg.reg.order);
  std::vector<std::uint8_t> bytes = hemp::encode(archive);
  hemp::write_file(f.out, bytes);
  hemp::write_metrics_csv(result.history, f.metrics);
  if (!f.checkpoint_out.empty()) hemp::save_checkpoint(result.full_store(), f.checkpoint_out);

  const hemp::EpochMetrics& last = result.history.back();
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "final acc (continuous): " << last.acc_w << "\n";
  std::cout << "final acc (quantized):  " << last.acc_wq << "\n";
  std::cout << "entropy proxy: " << last.h_proxy << " bits/tuple, plug-in: " << last.h_true
            << "\n";
  std::cout << "container: " << f.out << " (" << bytes.size() << " bytes)\n";
  return 0;
}

struct CompressFlags {
  std::string checkpoint;
  std::string out = "model.hemp";
  std::string config;
  int levels = 4;
  int order = 2;
  bool exempt_biases = false;
};

int run_compress(const CompressFlags& f) {
  hemp::ParamStore store = hemp::load_checkpoint(f.checkpoint);
  const auto& layers = store.layers();
  std::vector<hemp::Codebook> codebooks(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    bool is_bias = l.name.size() > 5 && l.name.substr(l.name.size() - 5) == ".bias";
    if (!is_bias) {
      codebooks[i] = hemp::fit_lloyd_max(l.values, f.levels);
      codebooks[i].layer_id = static_cast<int>(i);
      continue;
    }
    if (f.exempt_biases) {
      codebooks[i] = hemp::identity_codebook(l.values);
      codebooks[i].layer_id = static_cast<int>(i);
      continue;
    }
    // biases reuse the codebook fit on their layer's weights
    std::string weight_name = l.name.substr(0, l.name.size() - 5) + ".weight";
    int match = -1;
    for (std::size_t j = 0; j < layers.size(); ++j) {
      if (layers[j].name == weight_name) match = static_cast<int>(j);
    }
    if (match < 0) {
      codebooks[i] = hemp::fit_lloyd_max(l.values, f.levels);
    } else if (match < static_cast<int>(i)) {
      codebooks[i] = codebooks[static_cast<std::size_t>(match)];
    } else {
      hemp::Codebook cb = hemp::fit_lloyd_max(layers[static_cast<std::size_t>(match)].values,
                                              f.levels);
      codebooks[i] = cb;
      cb.layer_id = match;
      codebooks[static_cast<std::size_t>(match)] = std::move(cb);
    }
    codebooks[i].layer_id = static_cast<int>(i);
  }
  hemp::IndexMap indices = hemp::quantize_store(store, codebooks);
  hemp::ModelArchive archive = hemp::make_archive(store, codebooks, indices, f.order);
  std::vector<std::uint8_t> bytes = hemp::encode(archive);
  hemp::write_file(f.out, bytes);

  std::size_t symbols = archive.total_symbols();
  std::cout << "layers: " << archive.layers.size() << ", symbols: " << symbols << "\n";
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "container: " << f.out << " (" << bytes.size() << " bytes, "
            << 8.0 * static_cast<double>(bytes.size()) / static_cast<double>(symbols)
            << " bits/symbol)\n";
  return 0;
}

int run_decompress(const std::string& in, const std::string& out) {
  hemp::ModelArchive archive = hemp::decode(hemp::read_file(in));
  auto [store, codebooks] = hemp::restore_store(archive);
  hemp::save_checkpoint(store, out);
  std::cout << "restored " << store.layers().size() << " layers, " << store.total_count()
            << " parameters -> " << out << "\n";
  return 0;
}

struct EvalFlags {
  std::string model;
  std::string config;
  DataOpts data;
  std::uint64_t seed = 1;
};

int run_eval(const EvalFlags& f) {
  LoadedModel m = load_model_file(f.model);
  hemp::MlpSpec spec = hemp::spec_from_store(m.store);
  auto [train_ds, test_ds] = resolve_datasets(f.data, spec.inputs(), spec.outputs(), f.seed);
  (void)train_ds;
  hemp::EvalResult r = hemp::evaluate_store(m.store, test_ds);
  std::cout << "model: " << f.model << " (" << (m.quantized ? "container" : "checkpoint")
            << ")\n";
  std::cout << "bytes: " << m.file_bytes << "\n";
  std::cout << "test samples: " << test_ds.count() << "\n";
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "top1: " << r.accuracy << "\n";
  std::cout << "loss: " << r.loss << " nats\n";
  return 0;
}

struct DiagnoseFlags {
  std::string model;  // empty: random spec
  std::string config;
  int params = 96;
  int levels = 4;
  std::uint64_t seed = 1;
  std::string out = "diagnose.csv";
  int max_coords = 128;  // gradient-check sample size
};

// copy of the store with every value pulled strictly inside a quantization
// interval, so finite differences never straddle a kink
hemp::ParamStore jitter_interior(const hemp::ParamStore& store,
                                 const std::vector<hemp::Codebook>& codebooks, hemp::Rng& rng) {
  hemp::ParamStore out = store;
  for (const auto& l : store.layers()) {
    const hemp::Codebook& cb = codebooks[static_cast<std::size_t>(l.layer_id)];
    const auto& lv = cb.levels;
    if (lv.size() < 2) continue;  // identity bias codebooks can be single-level
    std::vector<double> v = l.values;
    for (double& w : v) {
      auto it = std::upper_bound(lv.begin(), lv.end(), w);
      std::size_t k = static_cast<std::size_t>(it - lv.begin());
      if (k == 0) k = 1;
      if (k >= lv.size()) k = lv.size() - 1;
      w = lv[k - 1] + (lv[k] - lv[k - 1]) * rng.uniform(0.1, 0.9);
    }
    out.layer(l.layer_id).values = std::move(v);
  }
  return out;
}

int run_diagnose(const DiagnoseFlags& f) {
  hemp::Rng root(f.seed);
  hemp::ParamStore store;
  std::vector<hemp::Codebook> codebooks;
  if (!f.model.empty()) {
    LoadedModel m = load_model_file(f.model);
    store = std::move(m.store);
    codebooks = std::move(m.codebooks);
    if (codebooks.empty()) {
      for (const auto& l : store.layers()) {
        hemp::Codebook cb = hemp::fit_lloyd_max(l.values, f.levels);
        cb.layer_id = l.layer_id;
        codebooks.push_back(std::move(cb));
      }
    }
    std::cout << "model: " << f.model << ", " << store.total_count() << " parameters\n";
  } else {
    hemp::Rng vals = root.fork("values");
    std::vector<double> v(static_cast<std::size_t>(f.params));
    for (double& x : v) x = vals.uniform(-1.0, 1.0);
    store.add_layer("random", {f.params}, std::move(v));
    hemp::Codebook cb = hemp::fit_lloyd_max(store.layer(0).values, f.levels);
    cb.layer_id = 0;
    codebooks.push_back(std::move(cb));
    std::cout << "random spec: " << f.params << " parameters, " << f.levels << " levels\n";
  }

  std::ofstream csv(f.out);
  if (!csv) throw hemp::DataError(hemp::DataError::Kind::io, "cannot write " + f.out);
  csv << "section,order,name,value\n";
  csv << std::setprecision(12);
  std::cout << std::setprecision(6);

  hemp::Rng jit = root.fork("jitter");
  hemp::ParamStore interior = jitter_interior(store, codebooks, jit);
  std::size_t total = interior.total_count();

  // closed-form gradient vs central finite differences on the proxy
  std::cout << "\ngradient check (closed form vs finite differences)\n";
  hemp::Rng pick = root.fork("pick");
  for (int order = 1; order <= 3; ++order) {
    hemp::TupleView view = hemp::group_tuples(interior, order);
    std::vector<double> g = hemp::proxy_gradient(interior, codebooks, view);
    std::vector<std::size_t> coords;
    if (total <= static_cast<std::size_t>(f.max_coords)) {
      for (std::size_t i = 0; i < total; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < f.max_coords; ++i) coords.push_back(pick.below(total));
    }
    double max_rel = 0.0;
    hemp::ParamStore probe = interior;
    for (std::size_t i : coords) {
      hemp::ParamStore::FlatRef ref = probe.locate(i);
      const hemp::Codebook& cb = codebooks[static_cast<std::size_t>(ref.layer_id)];
      if (cb.levels.size() < 2) continue;
      double span = cb.levels.back() - cb.levels.front();
      double h = 1e-6 * span / static_cast<double>(cb.levels.size() - 1);
      double w0 = probe.get_flat(i);
      probe.set_flat(i, w0 + h);
      double hp = hemp::proxy_entropy(probe, codebooks, view);
      probe.set_flat(i, w0 - h);
      double hm = hemp::proxy_entropy(probe, codebooks, view);
      probe.set_flat(i, w0);
      double fd = (hp - hm) / (2.0 * h);
      double rel = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-6});
      max_rel = std::max(max_rel, rel);
    }
    std::cout << "  order " << order << ": max rel err " << max_rel << " over " << coords.size()
              << " coords\n";
    csv << "gradient," << order << ",max_rel_err," << max_rel << "\n";
    csv << "gradient," << order << ",coords_checked," << coords.size() << "\n";
  }

  // order-1 stationary points: substitute and re-measure the gradient
  std::cout << "\nstationary points (order 1)\n";
  {
    hemp::TupleView view = hemp::group_tuples(interior, 1);
    hemp::Rng spick = root.fork("stationary");
    double worst = 0.0;
    int found = 0, tried = 0;
    hemp::ParamStore probe = interior;
    while (tried < 64 && found < 16) {
      ++tried;
      std::size_t i = spick.below(total);
      std::optional<double> w_star = hemp::stationary_position(i, probe, codebooks);
      if (!w_star) continue;
      double w0 = probe.get_flat(i);
      probe.set_flat(i, *w_star);
      std::vector<double> g = hemp::proxy_gradient(probe, codebooks, view);
      probe.set_flat(i, w0);
      worst = std::max(worst, std::abs(g[i]));
      ++found;
    }
    std::cout << "  " << found << " interior roots, max |gradient| after substitution " << worst
              << "\n";
    csv << "stationary,1,roots_checked," << found << "\n";
    csv << "stationary,1,max_abs_grad," << worst << "\n";
  }

  // bound vs the independently computed order-1 gradient
  std::cout << "\ngradient magnitude bound (order 1)\n";
  {
    hemp::TupleView view = hemp::group_tuples(interior, 1);
    std::vector<double> g = hemp::proxy_gradient(interior, codebooks, view);
    std::size_t violations = 0;
    for (std::size_t i = 0; i < total; ++i) {
      double bound = hemp::gradient_bound(i, interior, codebooks);
      if (std::abs(g[i]) > bound + 1e-9) ++violations;
    }
    std::cout << "  " << violations << " violations over " << total << " coords\n";
    csv << "bound,1,violations," << violations << "\n";
    csv << "bound,1,coords_checked," << total << "\n";
  }

  // proxy vs plug-in entropy of the quantized stream, orders 1..3
  std::cout << "\nentropy (proxy vs plug-in on the quantized stream)\n";
  hemp::IndexMap indices = hemp::quantize_store(store, codebooks);
  std::vector<double> per_symbol(4, 0.0);
  for (int order = 1; order <= 3; ++order) {
    hemp::TupleView view = hemp::group_tuples(store, order);
    hemp::EntropyReport rep = hemp::entropy_report(store, codebooks, indices, view);
    per_symbol[static_cast<std::size_t>(order)] = rep.per_symbol_true;
    std::cout << "  order " << order << ": proxy " << rep.h_proxy << " bits/tuple, plug-in "
              << rep.h_true << ", per symbol " << rep.per_symbol_true << "\n";
    csv << "entropy," << order << ",h_proxy," << rep.h_proxy << "\n";
    csv << "entropy," << order << ",h_true," << rep.h_true << "\n";
    csv << "entropy," << order << ",per_symbol_true," << rep.per_symbol_true << "\n";
  }

  // pair entropy never exceeds twice the singleton entropy when both are
  // measured on the same pair-aligned prefix
  {
    std::vector<std::int32_t> flat = indices.flat();
    std::size_t covered = flat.size() - flat.size() % 2;
    std::span<const std::int32_t> prefix(flat.data(), covered);
    double h1 = hemp::true_entropy(prefix, 1);
    double h2 = hemp::true_entropy(prefix, 2);
    bool ok = h2 <= 2.0 * h1 + 1e-9;
    std::cout << "\npair subadditivity on covered prefix: H2 " << h2 << " vs 2*H1 " << 2.0 * h1
              << (ok ? "  OK" : "  VIOLATION") << "\n";
    csv << "subadditivity,2,h2," << h2 << "\n";
    csv << "subadditivity,2,two_h1," << 2.0 * h1 << "\n";
    csv << "subadditivity,2,ok," << (ok ? 1 : 0) << "\n";
  }

  std::cout << "\nreport: " << f.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropy-regularized training and model compression"};
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "train a small MLP with entropy regularization");
  add_train_flags(train, tf);
  add_config_flag(train, tf.config);

  CompressFlags cf;
  CLI::App* compress = app.add_subcommand("compress", "quantize + entropy-code a checkpoint");
  compress->add_option("--checkpoint", cf.checkpoint, "continuous checkpoint input")->required();
  compress->add_option("--levels", cf.levels, "codebook size")->check(CLI::Range(2, 65535));
  compress->add_option("--order", cf.order, "coder context order")
      ->check(CLI::Range(1, hemp::kMaxOrder));
  compress->add_flag("--exempt-biases", cf.exempt_biases, "store biases losslessly");
  compress->add_option("--out", cf.out, "output container path");
  add_config_flag(compress, cf.config);

  std::string din, dout = "checkpoint.hmpc", dconfig;
  CLI::App* decompress = app.add_subcommand("decompress", "container -> checkpoint");
  decompress->add_option("--in", din, "container input")->required();
  decompress->add_option("--out", dout, "checkpoint output");
  add_config_flag(decompress, dconfig);

  EvalFlags ef;
  CLI::App* eval = app.add_subcommand("eval", "accuracy/loss of a model file");
  eval->add_option("--model", ef.model, "container or checkpoint")->required();
  add_data_flags(eval, ef.data);
  eval->add_option("--seed", ef.seed, "dataset RNG seed");
  add_config_flag(eval, ef.config);

  DiagnoseFlags gf;
  CLI::App* diagnose = app.add_subcommand("diagnose", "gradient/stationary/bound/entropy checks");
  diagnose->add_option("--model", gf.model, "container or checkpoint (default: random spec)");
  diagnose->add_option("--params", gf.params, "random spec parameter count")
      ->check(CLI::Range(2, 1 << 20));
  diagnose->add_option("--levels", gf.levels, "codebook size")->check(CLI::Range(2, 65535));
  diagnose->add_option("--seed", gf.seed, "RNG seed");
  diagnose->add_option("--max-coords", gf.max_coords, "gradient-check sample size")
      ->check(CLI::Range(1, 1 << 20));
  diagnose->add_option("--out", gf.out, "CSV report path");
  add_config_flag(diagnose, gf.config);

  try {
    app.parse(argc, argv);
    if (train->parsed()) apply_config(train, tf.config);
    if (compress->parsed()) apply_config(compress, cf.config);
    if (decompress->parsed()) apply_config(decompress, dconfig);
    if (eval->parsed()) apply_config(eval, ef.config);
    if (diagnose->parsed()) apply_config(diagnose, gf.config);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return run_train(tf);
    if (compress->parsed()) return run_compress(cf);
    if (decompress->parsed()) return run_decompress(din, dout);
    if (eval->parsed()) return run_eval(ef);
    if (diagnose->parsed()) return run_diagnose(gf);
  } catch (const hemp::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 4;
  } catch (const hemp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const hemp::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
