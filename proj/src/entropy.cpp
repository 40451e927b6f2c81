#include "hemp/entropy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace hemp {

namespace {

// per-coordinate branch table: the bracketing levels a value lands between,
// with the gradient sign of each branch (+1 lower neighbor, -1 upper
// neighbor, 0 clamped). A branch whose probability is exactly 0 (value
// sitting on a level) is kept: it adds no mass, but the derivative of the
// coordinate's own probabilities still needs both log terms.
struct CoordBranches {
  int count = 0;
  std::int32_t idx[2] = {0, 0};
  double p[2] = {0.0, 0.0};
  int sign[2] = {0, 0};
  double delta = 0.0;
  bool clamped = false;
};

CoordBranches make_branches(double w, const Codebook& cb) {
  BinAssignment a = assign_neighbors(w, cb);
  CoordBranches b;
  b.delta = a.delta;
  b.clamped = a.clamped();
  if (b.clamped) {
    b.idx[0] = a.q_minus;
    b.p[0] = 1.0;
    b.sign[0] = 0;
    b.count = 1;
    return b;
  }
  b.idx[0] = a.q_minus;
  b.p[0] = a.p_minus;
  b.sign[0] = +1;
  b.idx[1] = a.q_plus;
  b.p[1] = a.p_plus;
  b.sign[1] = -1;
  b.count = 2;
  return b;
}

struct FlatModel {
  std::vector<double> w;
  std::vector<const Codebook*> cb;
  std::vector<CoordBranches> branches;
  int key_bits = 0;
};

FlatModel build_flat(const ParamStore& store, const std::vector<Codebook>& codebooks) {
  if (codebooks.size() != store.layer_count()) {
    throw std::invalid_argument("need one codebook per layer");
  }
  FlatModel fm;
  fm.w = store.flat_values();
  fm.cb.reserve(fm.w.size());
  int max_n = 2;
  for (std::size_t i = 0; i < store.layer_count(); ++i) {
    const Codebook& cb = codebooks[i];
    if (cb.layer_id >= 0 && cb.layer_id != static_cast<int>(i)) {
      throw std::invalid_argument("codebook layer_id out of order");
    }
    max_n = std::max(max_n, cb.level_count());
    for (std::size_t k = 0; k < store.layer(static_cast<int>(i)).count(); ++k) {
      fm.cb.push_back(&cb);
    }
  }
  fm.key_bits = std::bit_width(static_cast<unsigned>(max_n));
  fm.branches.reserve(fm.w.size());
  for (std::size_t i = 0; i < fm.w.size(); ++i) {
    fm.branches.push_back(make_branches(fm.w[i], *fm.cb[i]));
  }
  return fm;
}

struct SupportEntry {
  std::uint64_t key = 0;
  double prob = 1.0;
  std::uint8_t branch[kMaxOrder] = {0};
};

// cartesian product of the coordinate branches, lexicographic in branch index
int enumerate_support(const CoordBranches* coords, int n, int bits, SupportEntry* out) {
  int total = 1;
  for (int m = 0; m < n; ++m) total *= coords[m].count;
  for (int e = 0; e < total; ++e) {
    SupportEntry& s = out[e];
    s.key = 0;
    s.prob = 1.0;
    int rem = e;
    for (int m = n - 1; m >= 0; --m) {  // lexicographic: last coordinate fastest
      int b = rem % coords[m].count;
      rem /= coords[m].count;
      s.branch[m] = static_cast<std::uint8_t>(b);
      s.prob *= coords[m].p[b];
      s.key |= static_cast<std::uint64_t>(coords[m].idx[b]) << (m * bits);
    }
  }
  return total;
}

using MassTable = std::unordered_map<std::uint64_t, double>;

void accumulate_range(const FlatModel& fm, int n, std::size_t j_begin, std::size_t j_end,
                      MassTable& table, EvalStats* stats) {
  SupportEntry buf[1 << kMaxOrder];
  for (std::size_t j = j_begin; j < j_end; ++j) {
    int cnt = enumerate_support(&fm.branches[j * static_cast<std::size_t>(n)], n, fm.key_bits, buf);
    int used = 0;
    for (int e = 0; e < cnt; ++e) {
      if (buf[e].prob <= 0.0) continue;  // dead branches matter only to the gradient
      table[buf[e].key] += buf[e].prob;
      ++used;
    }
    if (stats) {
      stats->tuples += 1;
      stats->xi_evals += used;
      stats->max_per_tuple = std::max(stats->max_per_tuple, used);
    }
  }
}

MassTable build_mass(const FlatModel& fm, const TupleView& view, EvalStats* stats, int threads) {
  const int n = view.order;
  if (n < 1 || n > kMaxOrder) throw std::invalid_argument("tuple order outside [1, 8]");
  if (fm.key_bits * n > 64) throw std::invalid_argument("tuple order too large for level count");
  MassTable table;
  table.reserve(view.tuple_count * 2);
  if (threads <= 1 || view.tuple_count < 1024) {
    accumulate_range(fm, n, 0, view.tuple_count, table, stats);
    return table;
  }
  std::size_t nt = static_cast<std::size_t>(threads);
  std::vector<MassTable> parts(nt);
  std::vector<EvalStats> part_stats(nt);
  std::vector<std::thread> pool;
  std::size_t chunk = (view.tuple_count + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    std::size_t lo = t * chunk, hi = std::min(view.tuple_count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, t, lo, hi] { accumulate_range(fm, n, lo, hi, parts[t], &part_stats[t]); });
  }
  for (auto& th : pool) th.join();
  for (std::size_t t = 0; t < nt; ++t) {  // merge in thread order
    for (const auto& [k, v] : parts[t]) table[k] += v;
    if (stats) {
      stats->tuples += part_stats[t].tuples;
      stats->xi_evals += part_stats[t].xi_evals;
      stats->max_per_tuple = std::max(stats->max_per_tuple, part_stats[t].max_per_tuple);
    }
  }
  return table;
}

double entropy_from_mass(const MassTable& table, double w_eff, int n) {
  // iterate keys in sorted order so the reduction is run-to-run stable
  std::vector<std::uint64_t> keys;
  keys.reserve(table.size());
  for (const auto& [k, v] : table) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  double mass = 0.0, slogs = 0.0;
  for (std::uint64_t k : keys) {
    double s = table.at(k);
    if (s <= 0.0) continue;  // zero-mass entries contribute 0 (s log s -> 0)
    mass += s;
    slogs += s * std::log2(s);
  }
  double dn = static_cast<double>(n);
  return (dn / w_eff) * (mass * std::log2(w_eff / dn) - slogs);
}

void gradient_range(const FlatModel& fm, const TupleView& view, const MassTable& table,
                    std::size_t j_begin, std::size_t j_end, std::vector<double>& grad) {
  const int n = view.order;
  const double w_eff = static_cast<double>(view.covered());
  SupportEntry buf[1 << kMaxOrder];
  std::vector<double> logs(static_cast<std::size_t>(1) << kMaxOrder);
  for (std::size_t j = j_begin; j < j_end; ++j) {
    const std::size_t base = j * static_cast<std::size_t>(n);
    const CoordBranches* coords = &fm.branches[base];
    int cnt = enumerate_support(coords, n, fm.key_bits, buf);
    for (int e = 0; e < cnt; ++e) {
      auto it = table.find(buf[e].key);
      double s = (it == table.end()) ? 0.0 : it->second;
      logs[static_cast<std::size_t>(e)] = std::log2(std::max(s, kLogFloor));
    }
    for (int m = 0; m < n; ++m) {
      const CoordBranches& cm = coords[static_cast<std::size_t>(m)];
      if (cm.clamped) continue;
      double acc = 0.0;
      for (int e = 0; e < cnt; ++e) {
        int b = buf[e].branch[m];
        if (cm.sign[b] == 0) continue;
        // weight by the other coordinates' branch probabilities; without
        // them the closed form disagrees with finite differences for n >= 2
        double rho = 1.0;
        for (int s2 = 0; s2 < n; ++s2) {
          if (s2 != m) rho *= coords[s2].p[buf[e].branch[s2]];
        }
        acc += static_cast<double>(cm.sign[b]) * rho * logs[static_cast<std::size_t>(e)];
      }
      grad[base + static_cast<std::size_t>(m)] = static_cast<double>(n) / (w_eff * cm.delta) * acc;
    }
  }
}

}  // namespace

std::vector<std::pair<std::vector<std::int32_t>, double>> joint_soft_prob(
    std::span<const BinAssignment> coords) {
  int n = static_cast<int>(coords.size());
  if (n < 1 || n > kMaxOrder) throw std::invalid_argument("tuple order outside [1, 8]");
  std::vector<CoordBranches> br(coords.size());
  for (int m = 0; m < n; ++m) {
    const BinAssignment& a = coords[static_cast<std::size_t>(m)];
    CoordBranches& b = br[static_cast<std::size_t>(m)];
    b.delta = a.delta;
    b.clamped = a.clamped();
    if (b.clamped) {
      b.idx[0] = a.q_minus;
      b.p[0] = 1.0;
      b.count = 1;
    } else {
      if (a.p_minus > 0.0) { b.idx[b.count] = a.q_minus; b.p[b.count] = a.p_minus; ++b.count; }
      if (a.p_plus > 0.0) { b.idx[b.count] = a.q_plus; b.p[b.count] = a.p_plus; ++b.count; }
    }
  }
  SupportEntry buf[1 << kMaxOrder];
  int cnt = enumerate_support(br.data(), n, 1, buf);  // keys unused here
  std::vector<std::pair<std::vector<std::int32_t>, double>> out;
  out.reserve(static_cast<std::size_t>(cnt));
  for (int e = 0; e < cnt; ++e) {
    std::vector<std::int32_t> xi(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
      xi[static_cast<std::size_t>(m)] = br[static_cast<std::size_t>(m)].idx[buf[e].branch[m]];
    }
    out.emplace_back(std::move(xi), buf[e].prob);
  }
  return out;
}

double proxy_entropy(const ParamStore& store, const std::vector<Codebook>& codebooks,
                     const TupleView& view, EvalStats* stats, int threads) {
  if (view.tuple_count == 0) throw std::invalid_argument("no tuples to evaluate");
  FlatModel fm = build_flat(store, codebooks);
  MassTable table = build_mass(fm, view, stats, threads);
  return entropy_from_mass(table, static_cast<double>(view.covered()), view.order);
}

std::vector<double> proxy_gradient(const ParamStore& store, const std::vector<Codebook>& codebooks,
                                   const TupleView& view, EvalStats* stats, int threads) {
  if (view.tuple_count == 0) throw std::invalid_argument("no tuples to evaluate");
  FlatModel fm = build_flat(store, codebooks);
  MassTable table = build_mass(fm, view, stats, threads);
  std::vector<double> grad(store.total_count(), 0.0);  // remainder stays 0
  if (threads <= 1 || view.tuple_count < 1024) {
    gradient_range(fm, view, table, 0, view.tuple_count, grad);
    return grad;
  }
  std::size_t nt = static_cast<std::size_t>(threads);
  std::vector<std::thread> pool;
  std::size_t chunk = (view.tuple_count + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    std::size_t lo = t * chunk, hi = std::min(view.tuple_count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] { gradient_range(fm, view, table, lo, hi, grad); });
  }
  for (auto& th : pool) th.join();
  return grad;
}

std::optional<double> stationary_position(std::size_t flat_index, const ParamStore& store,
                                          const std::vector<Codebook>& codebooks) {
  FlatModel fm = build_flat(store, codebooks);
  if (flat_index >= fm.w.size()) throw std::out_of_range("flat index out of range");
  const CoordBranches& bi = fm.branches[flat_index];
  if (bi.clamped) return std::nullopt;

  TupleView view = group_tuples(fm.w.size(), 1);
  MassTable table = build_mass(fm, view, nullptr, 1);

  BinAssignment a = assign_neighbors(fm.w[flat_index], *fm.cb[flat_index]);
  auto mass_at = [&](std::int32_t q) {
    auto it = table.find(static_cast<std::uint64_t>(q));
    return it == table.end() ? 0.0 : it->second;
  };
  // strip w_i's own soft mass: K's aggregate the *other* parameters
  double k_minus = mass_at(a.q_minus) - a.p_minus;
  double k_plus = mass_at(a.q_plus) - a.p_plus;
  double diff = k_plus - k_minus;
  if (diff < -1.0 || diff > 1.0) return std::nullopt;  // no interior root
  double p_plus_star = 0.5 * (k_minus - k_plus + 1.0);
  const Codebook& cb = *fm.cb[flat_index];
  double r_minus = cb.levels[static_cast<std::size_t>(a.q_minus - 1)];
  return r_minus + a.delta * p_plus_star;
}

double gradient_bound(std::size_t flat_index, const ParamStore& store,
                      const std::vector<Codebook>& codebooks) {
  FlatModel fm = build_flat(store, codebooks);
  if (flat_index >= fm.w.size()) throw std::out_of_range("flat index out of range");
  const CoordBranches& bi = fm.branches[flat_index];
  if (bi.clamped) return 0.0;

  TupleView view = group_tuples(fm.w.size(), 1);
  MassTable table = build_mass(fm, view, nullptr, 1);
  BinAssignment a = assign_neighbors(fm.w[flat_index], *fm.cb[flat_index]);
  auto mass_at = [&](std::int32_t q) {
    auto it = table.find(static_cast<std::uint64_t>(q));
    return it == table.end() ? 0.0 : it->second;
  };
  double w_eff = static_cast<double>(view.covered());
  double g = 1.0 / (w_eff * a.delta) *
             (std::log2(std::max(mass_at(a.q_minus), kLogFloor)) -
              std::log2(std::max(mass_at(a.q_plus), kLogFloor)));
  return std::abs(g);
}

TupleHistogram tuple_histogram(std::span<const std::int32_t> indices, int order) {
  if (order < 1 || order > kMaxOrder) throw std::invalid_argument("tuple order outside [1, 8]");
  std::size_t t = indices.size() / static_cast<std::size_t>(order);
  if (t == 0) throw std::invalid_argument("empty tuple set");
  std::int32_t max_idx = 0;
  for (std::int32_t q : indices) {
    if (q < 1) throw std::invalid_argument("indices must be >= 1");
    max_idx = std::max(max_idx, q);
  }
  int bits = std::bit_width(static_cast<unsigned>(max_idx));
  if (bits * order > 64) throw std::invalid_argument("tuple order too large for index range");
  TupleHistogram h;
  h.order = order;
  h.total = static_cast<std::int64_t>(t);
  for (std::size_t j = 0; j < t; ++j) {
    std::uint64_t key = 0;
    for (int m = 0; m < order; ++m) {
      key |= static_cast<std::uint64_t>(indices[j * static_cast<std::size_t>(order) +
                                                static_cast<std::size_t>(m)])
             << (m * bits);
    }
    h.counts[key] += 1;
  }
  return h;
}

double true_entropy(std::span<const std::int32_t> indices, int order) {
  TupleHistogram h = tuple_histogram(indices, order);
  std::vector<std::uint64_t> keys;
  keys.reserve(h.counts.size());
  for (const auto& [k, c] : h.counts) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  double total = static_cast<double>(h.total);
  double acc = 0.0;
  for (std::uint64_t k : keys) {
    double c = static_cast<double>(h.counts.at(k));
    acc += c * std::log2(c);
  }
  return std::log2(total) - acc / total;
}

double true_entropy(const IndexMap& indices, const TupleView& view) {
  return true_entropy(indices.flat(), view.order);
}

EntropyReport entropy_report(const ParamStore& store, const std::vector<Codebook>& codebooks,
                             const IndexMap& indices, const TupleView& view, int threads) {
  EntropyReport r;
  r.order = view.order;
  r.h_proxy = proxy_entropy(store, codebooks, view, nullptr, threads);
  r.h_true = true_entropy(indices, view);
  r.per_symbol_proxy = r.h_proxy / static_cast<double>(view.order);
  r.per_symbol_true = r.h_true / static_cast<double>(view.order);
  return r;
}

}  // namespace hemp
