// Python surface over the core library. Thin by design: every function here
// forwards to the C++ API, converting spans/bytes at the boundary. Heavy
// calls (training, entropy sweeps) release the GIL.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hemp/binning.hpp"
#include "hemp/codec.hpp"
#include "hemp/dataset.hpp"
#include "hemp/entropy.hpp"
#include "hemp/errors.hpp"
#include "hemp/lloyd.hpp"
#include "hemp/mlp.hpp"
#include "hemp/param_store.hpp"
#include "hemp/regularizer.hpp"
#include "hemp/trainer.hpp"

namespace py = pybind11;

namespace {

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  std::string_view s = b;
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  return std::vector<std::uint8_t>(p, p + s.size());
}

}  // namespace

PYBIND11_MODULE(hemp, m) {
  m.doc() = "entropy-regularized quantization: codebook fitting, tuple entropy, "
            "coding and the training loop";
  m.attr("__version__") = "0.1.0";

  // exception translators run newest-first, so the base goes in first
  auto base = py::register_exception<hemp::Error>(m, "HempError", PyExc_RuntimeError);
  py::register_exception<hemp::DataError>(m, "DataError", base.ptr());
  py::register_exception<hemp::FormatError>(m, "FormatError", base.ptr());
  py::register_exception<hemp::DivergenceError>(m, "DivergenceError", base.ptr());

  // ---- parameters and tuple grouping ----

  py::class_<hemp::LayerParams>(m, "LayerParams")
      .def_readonly("layer_id", &hemp::LayerParams::layer_id)
      .def_readonly("name", &hemp::LayerParams::name)
      .def_readonly("shape", &hemp::LayerParams::shape)
      .def_readonly("values", &hemp::LayerParams::values)
      .def("count", &hemp::LayerParams::count);

  py::class_<hemp::ParamStore>(m, "ParamStore")
      .def(py::init<>())
      .def(
          "add_layer",
          [](hemp::ParamStore& s, std::string name, std::vector<int> shape,
             std::optional<std::vector<double>> values) {
            return values ? s.add_layer(std::move(name), std::move(shape), std::move(*values))
                          : s.add_layer(std::move(name), std::move(shape));
          },
          py::arg("name"), py::arg("shape"), py::arg("values") = py::none())
      .def("layer_count", &hemp::ParamStore::layer_count)
      .def("total_count", &hemp::ParamStore::total_count)
      .def("layer", py::overload_cast<int>(&hemp::ParamStore::layer, py::const_),
           py::return_value_policy::reference_internal)
      .def("get_flat", &hemp::ParamStore::get_flat)
      .def("set_flat", &hemp::ParamStore::set_flat)
      .def("flat_values", &hemp::ParamStore::flat_values)
      .def("set_flat_values",
           [](hemp::ParamStore& s, const std::vector<double>& v) { s.set_flat_values(v); })
      .def("check_finite", &hemp::ParamStore::check_finite);

  py::class_<hemp::TupleView>(m, "TupleView")
      .def_readonly("order", &hemp::TupleView::order)
      .def_readonly("tuple_count", &hemp::TupleView::tuple_count)
      .def_readonly("remainder", &hemp::TupleView::remainder)
      .def("covered", &hemp::TupleView::covered);

  m.def("group_tuples",
        py::overload_cast<const hemp::ParamStore&, int>(&hemp::group_tuples),
        py::arg("store"), py::arg("order"));

  // ---- codebooks ----

  py::class_<hemp::Codebook>(m, "Codebook")
      .def(py::init<>())
      .def_readwrite("layer_id", &hemp::Codebook::layer_id)
      .def_readwrite("levels", &hemp::Codebook::levels)
      .def_readonly("reduced", &hemp::Codebook::reduced)
      .def("level_count", &hemp::Codebook::level_count);

  m.def(
      "fit_lloyd_max",
      [](const std::vector<double>& values, int levels, double tol, int max_iter,
         std::optional<std::vector<double>> warm_start, bool return_trace) {
        hemp::LloydOptions opt;
        opt.tol = tol;
        opt.max_iter = max_iter;
        std::vector<double> trace;
        hemp::Codebook cb = hemp::fit_lloyd_max(values, levels, opt,
                                                warm_start ? &*warm_start : nullptr,
                                                return_trace ? &trace : nullptr);
        return py::make_tuple(cb, trace);
      },
      py::arg("values"), py::arg("levels"), py::arg("tol") = 1e-8, py::arg("max_iter") = 100,
      py::arg("warm_start") = py::none(), py::arg("return_trace") = false,
      "Scalar Lloyd-Max fit; returns (codebook, mse_trace)");
  m.def("quantize",
        [](const std::vector<double>& values, const hemp::Codebook& cb) {
          return hemp::quantize(values, cb);
        },
        py::arg("values"), py::arg("codebook"));
  m.def("reconstruct",
        [](const std::vector<std::int32_t>& indices, const hemp::Codebook& cb) {
          return hemp::reconstruct(indices, cb);
        },
        py::arg("indices"), py::arg("codebook"));
  m.def("quantization_mse",
        [](const std::vector<double>& values, const hemp::Codebook& cb) {
          return hemp::quantization_mse(values, cb);
        },
        py::arg("values"), py::arg("codebook"));

  py::class_<hemp::IndexMap>(m, "IndexMap")
      .def_readonly("layers", &hemp::IndexMap::layers)
      .def("flat", &hemp::IndexMap::flat)
      .def("total_count", &hemp::IndexMap::total_count);

  m.def("quantize_store", &hemp::quantize_store, py::arg("store"), py::arg("codebooks"));
  m.def("reconstruct_store", &hemp::reconstruct_store, py::arg("store"), py::arg("codebooks"),
        py::arg("indices"));

  // ---- soft binning and entropy ----

  py::class_<hemp::BinAssignment>(m, "BinAssignment")
      .def_readonly("q_minus", &hemp::BinAssignment::q_minus)
      .def_readonly("q_plus", &hemp::BinAssignment::q_plus)
      .def_readonly("delta", &hemp::BinAssignment::delta)
      .def_readonly("p_minus", &hemp::BinAssignment::p_minus)
      .def_readonly("p_plus", &hemp::BinAssignment::p_plus)
      .def("clamped", &hemp::BinAssignment::clamped);

  m.def("assign_neighbors", &hemp::assign_neighbors, py::arg("w"), py::arg("codebook"));
  m.def("softmax_probs", &hemp::softmax_probs, py::arg("w"), py::arg("codebook"));
  m.def("joint_soft_prob",
        [](const std::vector<hemp::BinAssignment>& coords) {
          return hemp::joint_soft_prob(coords);
        },
        py::arg("coords"));

  py::class_<hemp::EvalStats>(m, "EvalStats")
      .def_readonly("tuples", &hemp::EvalStats::tuples)
      .def_readonly("xi_evals", &hemp::EvalStats::xi_evals)
      .def_readonly("max_per_tuple", &hemp::EvalStats::max_per_tuple)
      .def("mean_support", &hemp::EvalStats::mean_support);

  m.def(
      "proxy_entropy",
      [](const hemp::ParamStore& store, const std::vector<hemp::Codebook>& cbs,
         const hemp::TupleView& view, int threads) {
        return hemp::proxy_entropy(store, cbs, view, nullptr, threads);
      },
      py::arg("store"), py::arg("codebooks"), py::arg("view"), py::arg("threads") = 1,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "proxy_gradient",
      [](const hemp::ParamStore& store, const std::vector<hemp::Codebook>& cbs,
         const hemp::TupleView& view, int threads) {
        return hemp::proxy_gradient(store, cbs, view, nullptr, threads);
      },
      py::arg("store"), py::arg("codebooks"), py::arg("view"), py::arg("threads") = 1,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "support_stats",
      [](const hemp::ParamStore& store, const std::vector<hemp::Codebook>& cbs,
         const hemp::TupleView& view) {
        hemp::EvalStats stats;
        hemp::proxy_entropy(store, cbs, view, &stats);
        return stats;
      },
      py::arg("store"), py::arg("codebooks"), py::arg("view"),
      "Support-size counters from one entropy evaluation");
  m.def("stationary_position", &hemp::stationary_position, py::arg("flat_index"),
        py::arg("store"), py::arg("codebooks"));
  m.def("gradient_bound", &hemp::gradient_bound, py::arg("flat_index"), py::arg("store"),
        py::arg("codebooks"));
  m.def("true_entropy",
        [](const std::vector<std::int32_t>& indices, int order) {
          return hemp::true_entropy(indices, order);
        },
        py::arg("indices"), py::arg("order"));

  py::class_<hemp::EntropyReport>(m, "EntropyReport")
      .def_readonly("order", &hemp::EntropyReport::order)
      .def_readonly("h_proxy", &hemp::EntropyReport::h_proxy)
      .def_readonly("h_true", &hemp::EntropyReport::h_true)
      .def_readonly("per_symbol_proxy", &hemp::EntropyReport::per_symbol_proxy)
      .def_readonly("per_symbol_true", &hemp::EntropyReport::per_symbol_true);

  m.def("entropy_report", &hemp::entropy_report, py::arg("store"), py::arg("codebooks"),
        py::arg("indices"), py::arg("view"), py::arg("threads") = 1);

  // ---- regularizer pieces ----

  py::class_<hemp::RegConfig>(m, "RegConfig")
      .def(py::init<>())
      .def_readwrite("lambda_h", &hemp::RegConfig::lambda_h)
      .def_readwrite("lambda_e", &hemp::RegConfig::lambda_e)
      .def_readwrite("order", &hemp::RegConfig::order)
      .def_readwrite("insensitivity", &hemp::RegConfig::insensitivity)
      .def_readwrite("global_max", &hemp::RegConfig::global_max);

  m.def("reconstruction_error", &hemp::reconstruction_error, py::arg("store"),
        py::arg("codebooks"), py::arg("indices"));
  m.def("reconstruction_gradient", &hemp::reconstruction_gradient, py::arg("store"),
        py::arg("codebooks"), py::arg("indices"));
  m.def("insensitivity",
        [](const hemp::ParamStore& store, const std::vector<double>& loss_grads,
           bool global_max) { return hemp::insensitivity(store, loss_grads, global_max); },
        py::arg("store"), py::arg("loss_grads"), py::arg("global_max") = false);
  m.def(
      "regularization_update",
      [](const hemp::ParamStore& store, const std::vector<hemp::Codebook>& cbs,
         const hemp::TupleView& view, const hemp::IndexMap& indices,
         const std::vector<double>& loss_grads, const hemp::RegConfig& cfg, int threads) {
        return hemp::regularization_update(store, cbs, view, indices, loss_grads, cfg, nullptr,
                                           threads);
      },
      py::arg("store"), py::arg("codebooks"), py::arg("view"), py::arg("indices"),
      py::arg("loss_grads"), py::arg("config"), py::arg("threads") = 1);

  // ---- container format ----

  py::class_<hemp::ModelArchive::Layer>(m, "ArchiveLayer")
      .def_readonly("name", &hemp::ModelArchive::Layer::name)
      .def_readonly("shape", &hemp::ModelArchive::Layer::shape)
      .def_readonly("levels", &hemp::ModelArchive::Layer::levels)
      .def_readonly("indices", &hemp::ModelArchive::Layer::indices);

  py::class_<hemp::ModelArchive>(m, "ModelArchive")
      .def_readonly("order", &hemp::ModelArchive::order)
      .def_readonly("layers", &hemp::ModelArchive::layers)
      .def("total_symbols", &hemp::ModelArchive::total_symbols);

  m.def("make_archive", &hemp::make_archive, py::arg("store"), py::arg("codebooks"),
        py::arg("indices"), py::arg("order"));
  m.def("encode", [](const hemp::ModelArchive& a) { return to_bytes(hemp::encode(a)); },
        py::arg("archive"));
  m.def("decode", [](const py::bytes& b) { return hemp::decode(from_bytes(b)); },
        py::arg("data"));
  m.def("header_bytes", &hemp::header_bytes, py::arg("archive"));
  m.def("export_raw_indices",
        [](const hemp::ModelArchive& a) { return to_bytes(hemp::export_raw_indices(a)); },
        py::arg("archive"));
  m.def("restore_store", &hemp::restore_store, py::arg("archive"),
        "Reconstructed ParamStore plus the per-layer codebooks");
  m.def("save_checkpoint", &hemp::save_checkpoint, py::arg("store"), py::arg("path"));
  m.def("load_checkpoint", &hemp::load_checkpoint, py::arg("path"));

  // ---- datasets ----

  py::class_<hemp::Dataset>(m, "Dataset")
      .def_readonly("rows", &hemp::Dataset::rows)
      .def_readonly("cols", &hemp::Dataset::cols)
      .def_readonly("images", &hemp::Dataset::images)
      .def_readonly("labels", &hemp::Dataset::labels)
      .def_readonly("num_classes", &hemp::Dataset::num_classes)
      .def("count", &hemp::Dataset::count)
      .def("dim", &hemp::Dataset::dim);

  m.def("synth_digits", &hemp::synth_digits, py::arg("per_class"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());
  m.def("synth_gaussian_blobs", &hemp::synth_gaussian_blobs, py::arg("classes"),
        py::arg("per_class"), py::arg("dim"), py::arg("seed"), py::arg("spread") = 0.1);
  m.def("stratified_split",
        [](const hemp::Dataset& ds, std::size_t first_count, std::uint64_t seed) {
          return hemp::stratified_split(ds, first_count, hemp::Rng(seed));
        },
        py::arg("dataset"), py::arg("first_count"), py::arg("seed"));
  m.def("load_idx", &hemp::load_idx, py::arg("images_path"), py::arg("labels_path"));
  m.def("write_idx", &hemp::write_idx, py::arg("dataset"), py::arg("images_path"),
        py::arg("labels_path"));

  // ---- training ----

  py::class_<hemp::MlpSpec>(m, "MlpSpec")
      .def(py::init([](const std::string& s) { return hemp::MlpSpec::parse(s); }),
           py::arg("spec"))
      .def_readonly("widths", &hemp::MlpSpec::widths)
      .def("__str__", &hemp::MlpSpec::to_string);
  py::implicitly_convertible<std::string, hemp::MlpSpec>();

  py::class_<hemp::EvalResult>(m, "EvalResult")
      .def_readonly("loss", &hemp::EvalResult::loss)
      .def_readonly("accuracy", &hemp::EvalResult::accuracy);

  m.def("evaluate_store", &hemp::evaluate_store, py::arg("store"), py::arg("dataset"));

  py::class_<hemp::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &hemp::TrainConfig::lr)
      .def_readwrite("momentum", &hemp::TrainConfig::momentum)
      .def_readwrite("batch_size", &hemp::TrainConfig::batch_size)
      .def_readwrite("epochs", &hemp::TrainConfig::epochs)
      .def_readwrite("seed", &hemp::TrainConfig::seed)
      .def_readwrite("levels", &hemp::TrainConfig::levels)
      .def_readwrite("reg", &hemp::TrainConfig::reg)
      .def_readwrite("refit_every", &hemp::TrainConfig::refit_every)
      .def_readwrite("quantize_biases", &hemp::TrainConfig::quantize_biases)
      .def_readwrite("threads", &hemp::TrainConfig::threads)
      .def_readwrite("divergence_limit", &hemp::TrainConfig::divergence_limit);

  py::class_<hemp::EpochMetrics>(m, "EpochMetrics")
      .def_readonly("epoch", &hemp::EpochMetrics::epoch)
      .def_readonly("loss_w", &hemp::EpochMetrics::loss_w)
      .def_readonly("loss_wq", &hemp::EpochMetrics::loss_wq)
      .def_readonly("acc_w", &hemp::EpochMetrics::acc_w)
      .def_readonly("acc_wq", &hemp::EpochMetrics::acc_wq)
      .def_readonly("h_proxy", &hemp::EpochMetrics::h_proxy)
      .def_readonly("h_true", &hemp::EpochMetrics::h_true)
      .def_readonly("e_term", &hemp::EpochMetrics::e_term)
      .def_readonly("est_bytes", &hemp::EpochMetrics::est_bytes);

  py::class_<hemp::TrainResult>(m, "TrainResult")
      .def_readonly("codebooks", &hemp::TrainResult::codebooks)
      .def_readonly("indices", &hemp::TrainResult::indices)
      .def_readonly("history", &hemp::TrainResult::history)
      .def("to_archive", &hemp::TrainResult::to_archive, py::arg("order"))
      .def("eval_continuous", &hemp::TrainResult::eval_continuous, py::arg("dataset"))
      .def("eval_quantized", &hemp::TrainResult::eval_quantized, py::arg("dataset"))
      .def("full_store", &hemp::TrainResult::full_store);

  m.def("train", &hemp::train, py::arg("arch"), py::arg("train_ds"), py::arg("test_ds"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("write_metrics_csv", &hemp::write_metrics_csv, py::arg("history"), py::arg("path"));
}
