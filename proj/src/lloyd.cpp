#include "hemp/lloyd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hemp {

namespace {

std::vector<double> sorted_finite_copy(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("cannot fit codebook on empty input");
  std::vector<double> s(values.begin(), values.end());
  for (double v : s) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite input to codebook fit");
  }
  std::sort(s.begin(), s.end());
  return s;
}

std::vector<double> distinct_values(const std::vector<double>& sorted) {
  std::vector<double> d;
  for (double v : sorted) {
    if (d.empty() || v != d.back()) d.push_back(v);
  }
  return d;
}

// linear-interpolated empirical quantile on a sorted sample
double quantile(const std::vector<double>& sorted, double q) {
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

Codebook identity_codebook(std::span<const double> values) {
  auto sorted = sorted_finite_copy(values);
  Codebook cb;
  cb.levels = distinct_values(sorted);
  cb.reduced = false;
  return cb;
}

Codebook fit_lloyd_max(std::span<const double> values, int levels, const LloydOptions& opt,
                       const std::vector<double>* warm_start, std::vector<double>* mse_trace) {
  if (levels < 2) throw std::invalid_argument("codebook needs at least 2 levels");
  auto sorted = sorted_finite_copy(values);
  auto distinct = distinct_values(sorted);

  Codebook cb;
  if (distinct.size() < 2) {
    throw std::invalid_argument("codebook fit needs at least 2 distinct values");
  }
  if (static_cast<int>(distinct.size()) < levels) {
    // not enough distinct inputs for N cells: the distinct values themselves
    // are already the zero-error codebook
    cb.levels = distinct;
    cb.reduced = true;
    if (mse_trace) mse_trace->push_back(0.0);
    return cb;
  }

  std::size_t n = static_cast<std::size_t>(levels);
  std::vector<double> lv(n);
  if (warm_start && warm_start->size() == n) {
    lv = *warm_start;
    std::sort(lv.begin(), lv.end());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      lv[i] = quantile(sorted, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    }
  }
  // heavy ties can make quantiles (or a stale warm start) coincide; fall back
  // to evenly spaced picks from the distinct values, which are increasing
  if (std::adjacent_find(lv.begin(), lv.end()) != lv.end()) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = i * (distinct.size() - 1) / (n - 1);
      lv[i] = distinct[k];
    }
  }

  const double count = static_cast<double>(sorted.size());
  double prev_mse = std::numeric_limits<double>::infinity();
  std::vector<double> cell_sum(n), cell_min(n), cell_max(n);
  std::vector<std::size_t> cell_cnt(n);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    std::fill(cell_sum.begin(), cell_sum.end(), 0.0);
    std::fill(cell_cnt.begin(), cell_cnt.end(), std::size_t{0});
    std::fill(cell_min.begin(), cell_min.end(), std::numeric_limits<double>::infinity());
    std::fill(cell_max.begin(), cell_max.end(), -std::numeric_limits<double>::infinity());

    // assignment sweep: sorted data against midpoint boundaries
    double mse = 0.0;
    std::size_t cell = 0;
    for (double v : sorted) {
      while (cell + 1 < n && v > 0.5 * (lv[cell] + lv[cell + 1])) ++cell;
      double d = v - lv[cell];
      mse += d * d;
      cell_sum[cell] += v;
      cell_cnt[cell] += 1;
      cell_min[cell] = std::min(cell_min[cell], v);
      cell_max[cell] = std::max(cell_max[cell], v);
    }
    mse /= count;
    if (mse_trace) mse_trace->push_back(mse);
    if (mse > prev_mse * (1.0 + 1e-12) + 1e-18) {
      throw std::logic_error("lloyd iteration increased MSE");  // would be a bug
    }
    if (std::isfinite(prev_mse) && prev_mse - mse <= opt.tol * std::max(prev_mse, 1e-300)) {
      break;
    }
    prev_mse = mse;

    // update sweep: occupied cells move to their mean
    std::vector<std::size_t> empties;
    for (std::size_t k = 0; k < n; ++k) {
      if (cell_cnt[k] > 0) {
        lv[k] = cell_sum[k] / static_cast<double>(cell_cnt[k]);
      } else {
        empties.push_back(k);
      }
    }
    if (!empties.empty()) {
      // re-seed each empty level inside the widest occupied value span;
      // the dropped level served nobody, so MSE cannot go up
      std::vector<std::size_t> occ;
      for (std::size_t k = 0; k < n; ++k) {
        if (cell_cnt[k] > 0) occ.push_back(k);
      }
      std::sort(occ.begin(), occ.end(), [&](std::size_t a, std::size_t b) {
        return cell_max[a] - cell_min[a] > cell_max[b] - cell_min[b];
      });
      for (std::size_t j = 0; j < empties.size(); ++j) {
        std::size_t host = occ[j % occ.size()];
        double frac = 0.5 / static_cast<double>(1 + j / occ.size());
        lv[empties[j]] = cell_min[host] + frac * (cell_max[host] - cell_min[host]);
      }
    }
    std::sort(lv.begin(), lv.end());
  }

  // exact duplicates can survive on degenerate data; keep levels strictly increasing
  lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
  cb.levels = std::move(lv);
  cb.reduced = static_cast<int>(cb.levels.size()) < levels;
  return cb;
}

std::vector<std::int32_t> quantize(std::span<const double> values, const Codebook& cb) {
  const auto& lv = cb.levels;
  if (lv.empty()) throw std::invalid_argument("empty codebook");
  std::vector<double> bounds(lv.size() > 1 ? lv.size() - 1 : 0);
  for (std::size_t k = 0; k + 1 < lv.size(); ++k) bounds[k] = 0.5 * (lv[k] + lv[k + 1]);
  std::vector<std::int32_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // first boundary >= w; exact midpoint ties land on the lower index
    auto it = std::lower_bound(bounds.begin(), bounds.end(), values[i]);
    out[i] = static_cast<std::int32_t>(it - bounds.begin()) + 1;
  }
  return out;
}

std::vector<double> reconstruct(std::span<const std::int32_t> indices, const Codebook& cb) {
  std::vector<double> out(indices.size());
  int n = cb.level_count();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::int32_t q = indices[i];
    if (q < 1 || q > n) throw std::out_of_range("quantization index outside [1, N]");
    out[i] = cb.levels[static_cast<std::size_t>(q - 1)];
  }
  return out;
}

double quantization_mse(std::span<const double> values, const Codebook& cb) {
  auto idx = quantize(values, cb);
  double mse = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double d = values[i] - cb.levels[static_cast<std::size_t>(idx[i] - 1)];
    mse += d * d;
  }
  return values.empty() ? 0.0 : mse / static_cast<double>(values.size());
}

std::vector<std::int32_t> IndexMap::flat() const {
  std::vector<std::int32_t> out;
  std::size_t total = 0;
  for (const auto& l : layers) total += l.size();
  out.reserve(total);
  for (const auto& l : layers) out.insert(out.end(), l.begin(), l.end());
  return out;
}

std::size_t IndexMap::total_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.size();
  return total;
}

IndexMap quantize_store(const ParamStore& store, const std::vector<Codebook>& codebooks) {
  if (codebooks.size() != store.layer_count()) {
    throw std::invalid_argument("need one codebook per layer");
  }
  IndexMap map;
  map.layers.reserve(store.layer_count());
  for (std::size_t i = 0; i < store.layer_count(); ++i) {
    map.layers.push_back(quantize(store.layer(static_cast<int>(i)).values, codebooks[i]));
  }
  return map;
}

ParamStore reconstruct_store(const ParamStore& store, const std::vector<Codebook>& codebooks,
                             const IndexMap& indices) {
  if (codebooks.size() != store.layer_count() || indices.layers.size() != store.layer_count()) {
    throw std::invalid_argument("layer count mismatch");
  }
  ParamStore out;
  for (std::size_t i = 0; i < store.layer_count(); ++i) {
    const auto& l = store.layer(static_cast<int>(i));
    out.add_layer(l.name, l.shape, reconstruct(indices.layers[i], codebooks[i]));
  }
  return out;
}

}  // namespace hemp
