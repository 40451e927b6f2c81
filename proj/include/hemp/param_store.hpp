#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hemp {

struct LayerParams {
  int layer_id = -1;
  std::string name;
  std::vector<int> shape;               // positive dims, row-major layout
  std::vector<double> values;           // product(shape) entries
  std::vector<double> momentum_buffer;  // SGD state, same length as values

  std::size_t count() const { return values.size(); }
};

// Owns every trainable parameter. Layer registration order is frozen and
// defines the canonical flat order (layers in registration order, row-major
// within a layer) that tuple grouping, entropy sums and gradient vectors
// all share. Nothing here reorders silently.
class ParamStore {
 public:
  // Registers a layer; returns its id (dense, starting at 0).
  // Values default to zeros when omitted.
  int add_layer(std::string name, std::vector<int> shape);
  int add_layer(std::string name, std::vector<int> shape, std::vector<double> values);

  std::size_t layer_count() const { return layers_.size(); }
  LayerParams& layer(int id);
  const LayerParams& layer(int id) const;
  const std::vector<LayerParams>& layers() const { return layers_; }

  std::size_t total_count() const { return total_; }

  struct FlatRef {
    int layer_id;
    std::size_t offset;
  };
  FlatRef locate(std::size_t pos) const;  // flat position -> (layer, offset)
  std::size_t flat_base(int layer_id) const { return prefix_[layer_id]; }

  double get_flat(std::size_t pos) const;
  void set_flat(std::size_t pos, double v);

  std::vector<double> flat_values() const;
  void set_flat_values(std::span<const double> v);

  // throws DataError(bad_value) on any NaN/Inf parameter
  void check_finite() const;

 private:
  std::vector<LayerParams> layers_;
  std::vector<std::size_t> prefix_;  // prefix_[i] = flat base of layer i
  std::size_t total_ = 0;
};

// Fixed partition of the flat order into consecutive n-tuples. Trailing
// remainder positions (total % n of them) are excluded from entropy terms
// and get zero entropy gradient.
struct TupleView {
  int order = 1;
  std::size_t tuple_count = 0;
  std::vector<std::size_t> remainder;  // flat positions past the last tuple

  std::size_t covered() const { return tuple_count * static_cast<std::size_t>(order); }
  std::size_t tuple_begin(std::size_t j) const { return j * static_cast<std::size_t>(order); }
  std::vector<std::size_t> tuple_positions(std::size_t j) const;
};

TupleView group_tuples(const ParamStore& store, int order);
TupleView group_tuples(std::size_t total, int order);

}  // namespace hemp
