#include "hemp/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hemp/errors.hpp"

namespace hemp {

static std::size_t shape_product(const std::vector<int>& shape) {
  if (shape.empty()) throw std::invalid_argument("layer shape must not be empty");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("layer shape dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

int ParamStore::add_layer(std::string name, std::vector<int> shape) {
  std::size_t n = shape_product(shape);
  return add_layer(std::move(name), std::move(shape), std::vector<double>(n, 0.0));
}

int ParamStore::add_layer(std::string name, std::vector<int> shape, std::vector<double> values) {
  std::size_t n = shape_product(shape);
  if (values.size() != n) throw std::invalid_argument("layer values do not match shape");
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError(DataError::Kind::bad_value, "non-finite parameter value");
  }
  LayerParams lp;
  lp.layer_id = static_cast<int>(layers_.size());
  lp.name = std::move(name);
  lp.shape = std::move(shape);
  lp.values = std::move(values);
  lp.momentum_buffer.assign(n, 0.0);
  prefix_.push_back(total_);
  total_ += n;
  layers_.push_back(std::move(lp));
  return layers_.back().layer_id;
}

LayerParams& ParamStore::layer(int id) {
  return layers_.at(static_cast<std::size_t>(id));
}

const LayerParams& ParamStore::layer(int id) const {
  return layers_.at(static_cast<std::size_t>(id));
}

ParamStore::FlatRef ParamStore::locate(std::size_t pos) const {
  if (pos >= total_) throw std::out_of_range("flat position out of range");
  auto it = std::upper_bound(prefix_.begin(), prefix_.end(), pos);
  int id = static_cast<int>(it - prefix_.begin()) - 1;
  return FlatRef{id, pos - prefix_[static_cast<std::size_t>(id)]};
}

double ParamStore::get_flat(std::size_t pos) const {
  FlatRef r = locate(pos);
  return layers_[static_cast<std::size_t>(r.layer_id)].values[r.offset];
}

void ParamStore::set_flat(std::size_t pos, double v) {
  FlatRef r = locate(pos);
  layers_[static_cast<std::size_t>(r.layer_id)].values[r.offset] = v;
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(total_);
  for (const auto& l : layers_) out.insert(out.end(), l.values.begin(), l.values.end());
  return out;
}

void ParamStore::set_flat_values(std::span<const double> v) {
  if (v.size() != total_) throw std::invalid_argument("flat value count mismatch");
  std::size_t pos = 0;
  for (auto& l : layers_) {
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(pos),
              v.begin() + static_cast<std::ptrdiff_t>(pos + l.count()), l.values.begin());
    pos += l.count();
  }
}

void ParamStore::check_finite() const {
  for (const auto& l : layers_) {
    for (double v : l.values) {
      if (!std::isfinite(v)) {
        throw DataError(DataError::Kind::bad_value, "non-finite value in layer " + l.name);
      }
    }
  }
}

std::vector<std::size_t> TupleView::tuple_positions(std::size_t j) const {
  if (j >= tuple_count) throw std::out_of_range("tuple index out of range");
  std::vector<std::size_t> out(static_cast<std::size_t>(order));
  for (int m = 0; m < order; ++m) out[static_cast<std::size_t>(m)] = tuple_begin(j) + static_cast<std::size_t>(m);
  return out;
}

TupleView group_tuples(std::size_t total, int order) {
  if (order < 1) throw std::invalid_argument("tuple order must be >= 1");
  TupleView v;
  v.order = order;
  v.tuple_count = total / static_cast<std::size_t>(order);
  for (std::size_t p = v.covered(); p < total; ++p) v.remainder.push_back(p);
  return v;
}

TupleView group_tuples(const ParamStore& store, int order) {
  return group_tuples(store.total_count(), order);
}

}  // namespace hemp
