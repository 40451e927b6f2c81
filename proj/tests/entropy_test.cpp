#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "hemp/binning.hpp"
#include "hemp/entropy.hpp"
#include "hemp/lloyd.hpp"
#include "hemp/param_store.hpp"
#include "hemp/rng.hpp"

using hemp::Codebook;
using hemp::ParamStore;
using hemp::TupleView;

namespace {

Codebook book(int layer_id, std::vector<double> levels) {
  Codebook cb;
  cb.layer_id = layer_id;
  cb.levels = std::move(levels);
  return cb;
}

// store with one layer of `values` against a single codebook
struct Fixture {
  ParamStore store;
  std::vector<Codebook> cbs;

  Fixture(std::vector<double> values, std::vector<double> levels) {
    int count = static_cast<int>(values.size());
    store.add_layer("w", {count}, std::move(values));
    cbs.push_back(book(0, std::move(levels)));
  }
};

// random store with every value strictly inside a quantization interval
Fixture interior_fixture(int count, int levels, hemp::Rng& r) {
  std::vector<double> lv(static_cast<std::size_t>(levels));
  double x = r.uniform(-2.0, -1.0);
  for (double& v : lv) {
    v = x;
    x += r.uniform(0.3, 1.2);
  }
  std::vector<double> vals(static_cast<std::size_t>(count));
  for (double& v : vals) {
    std::size_t k = r.below(static_cast<std::uint64_t>(levels - 1));
    v = lv[k] + (lv[k + 1] - lv[k]) * r.uniform(0.05, 0.95);
  }
  return Fixture(std::move(vals), std::move(lv));
}

double fd_gradient(ParamStore& store, const std::vector<Codebook>& cbs, const TupleView& view,
                   std::size_t i, double h) {
  double w0 = store.get_flat(i);
  store.set_flat(i, w0 + h);
  double hp = hemp::proxy_entropy(store, cbs, view);
  store.set_flat(i, w0 - h);
  double hm = hemp::proxy_entropy(store, cbs, view);
  store.set_flat(i, w0);
  return (hp - hm) / (2.0 * h);
}

}  // namespace

TEST_CASE("joint probabilities are products over the bracketing levels") {
  Codebook cb = book(0, {0.0, 1.0});
  std::vector<hemp::BinAssignment> coords = {hemp::assign_neighbors(0.25, cb),
                                             hemp::assign_neighbors(0.4, cb)};
  // marginals (0.75, 0.25) and (0.6, 0.4)
  auto joint = hemp::joint_soft_prob(coords);
  REQUIRE(joint.size() == 4);
  double sum = 0.0;
  for (const auto& [xi, p] : joint) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  // lexicographic support order
  CHECK(joint[0].first == std::vector<std::int32_t>{1, 1});
  CHECK(joint[0].second == doctest::Approx(0.45));
  CHECK(joint[1].first == std::vector<std::int32_t>{1, 2});
  CHECK(joint[1].second == doctest::Approx(0.30));
  CHECK(joint[2].first == std::vector<std::int32_t>{2, 1});
  CHECK(joint[2].second == doctest::Approx(0.15));
  CHECK(joint[3].first == std::vector<std::int32_t>{2, 2});
  CHECK(joint[3].second == doctest::Approx(0.10));
}

TEST_CASE("support shrinks when coordinates sit on levels") {
  Codebook cb = book(0, {0.0, 1.0, 2.0});
  std::vector<hemp::BinAssignment> coords = {hemp::assign_neighbors(1.0, cb),
                                             hemp::assign_neighbors(0.5, cb)};
  auto joint = hemp::joint_soft_prob(coords);
  REQUIRE(joint.size() == 2);  // first coordinate is deterministic
  CHECK(joint[0].first == std::vector<std::int32_t>{2, 1});
  CHECK(joint[0].second == doctest::Approx(0.5));
  CHECK(joint[1].first == std::vector<std::int32_t>{2, 2});
}

TEST_CASE("two half-split parameters give the frozen entropy and gradient") {
  Fixture f({0.25, 0.25}, {0.0, 1.0});
  TupleView view = hemp::group_tuples(f.store, 1);
  double h = hemp::proxy_entropy(f.store, f.cbs, view);
  // S = (1.5, 0.5) over two symbols
  CHECK(h == doctest::Approx(0.8112781244591328).epsilon(1e-12));
  std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
  REQUIRE(g.size() == 2);
  double expect = 0.5 * std::log2(3.0);
  CHECK(g[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("proxy equals the plug-in entropy when values sit on levels") {
  hemp::Rng r(31);
  for (int order = 1; order <= 3; ++order) {
    std::vector<double> lv = {-1.0, 0.0, 0.5, 2.0};
    std::vector<double> vals(24);
    std::vector<std::int32_t> idx(24);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      idx[i] = static_cast<std::int32_t>(r.below(4)) + 1;
      vals[i] = lv[static_cast<std::size_t>(idx[i] - 1)];
    }
    Fixture f(vals, lv);
    TupleView view = hemp::group_tuples(f.store, order);
    double proxy = hemp::proxy_entropy(f.store, f.cbs, view);
    double truth = hemp::true_entropy(idx, order);
    CHECK(std::abs(proxy - truth) < 1e-12);
  }
}

TEST_CASE("closed-form gradient matches central finite differences") {
  hemp::Rng r(32);
  for (int order = 1; order <= 3; ++order) {
    for (int levels : {2, 4, 8}) {
      Fixture f = interior_fixture(30, levels, r);
      TupleView view = hemp::group_tuples(f.store, order);
      std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
      for (std::size_t i = 0; i < f.store.total_count(); i += 3) {
        double delta = hemp::assign_neighbors(f.store.get_flat(i), f.cbs[0]).delta;
        double fd = fd_gradient(f.store, f.cbs, view, i, 1e-6 * delta);
        double rel = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-6});
        CHECK(rel < 1e-5);
      }
    }
  }
}

TEST_CASE("remainder positions carry no entropy influence") {
  hemp::Rng r(33);
  Fixture f = interior_fixture(8, 3, r);  // order 3 leaves 2 spare
  TupleView view = hemp::group_tuples(f.store, 3);
  REQUIRE(view.remainder.size() == 2);
  std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
  CHECK(g[6] == 0.0);
  CHECK(g[7] == 0.0);
  double h0 = hemp::proxy_entropy(f.store, f.cbs, view);
  f.store.set_flat(7, f.store.get_flat(7) + 0.1);
  CHECK(hemp::proxy_entropy(f.store, f.cbs, view) == h0);
}

TEST_CASE("clamped out-of-range values get zero gradient") {
  Fixture f({-10.0, 0.25, 0.6, 12.0}, {0.0, 1.0});
  TupleView view = hemp::group_tuples(f.store, 2);
  std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
  CHECK(g[0] == 0.0);
  CHECK(g[3] == 0.0);
  CHECK(g[1] != 0.0);
  CHECK(std::isfinite(hemp::proxy_entropy(f.store, f.cbs, view)));
}

TEST_CASE("support stays within 2^n entries per tuple") {
  hemp::Rng r(34);
  for (int order = 1; order <= 3; ++order) {
    Fixture f = interior_fixture(60, 8, r);
    TupleView view = hemp::group_tuples(f.store, order);
    hemp::EvalStats stats;
    hemp::proxy_entropy(f.store, f.cbs, view, &stats);
    CHECK(stats.tuples == static_cast<std::int64_t>(view.tuple_count));
    CHECK(stats.max_per_tuple <= 1 << order);
    CHECK(stats.xi_evals <= stats.tuples * (1 << order));
    // strictly interior points use the full bracketing set
    CHECK(stats.max_per_tuple == 1 << order);
  }
}

TEST_CASE("tuple histogram packs and counts") {
  std::vector<std::int32_t> idx = {1, 2, 1, 2, 3, 1};
  hemp::TupleHistogram hist = hemp::tuple_histogram(idx, 2);
  CHECK(hist.total == 3);
  CHECK(hist.counts.size() == 2);  // (1,2) twice, (3,1) once
  CHECK_THROWS(hemp::tuple_histogram(idx, 0));
  std::vector<std::int32_t> none = {1};
  CHECK_THROWS(hemp::tuple_histogram(none, 2));  // no complete tuple
  std::vector<std::int32_t> bad = {0, 1};
  CHECK_THROWS(hemp::tuple_histogram(bad, 1));
}

TEST_CASE("plug-in entropy of known streams") {
  std::vector<std::int32_t> half = {1, 1, 2, 2};
  CHECK(hemp::true_entropy(half, 1) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<std::int32_t> pairs = {1, 2, 3, 4};  // two distinct pairs
  CHECK(hemp::true_entropy(pairs, 2) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<std::int32_t> uniform = {1, 2, 3, 4};
  CHECK(hemp::true_entropy(uniform, 1) == doctest::Approx(2.0).epsilon(1e-12));
  std::vector<std::int32_t> constant(100, 5);
  CHECK(hemp::true_entropy(constant, 1) == doctest::Approx(0.0));
}

TEST_CASE("pair entropy is subadditive on tuple-aligned streams") {
  hemp::Rng r(35);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int32_t> idx(2 * (10 + r.below(40)));
    for (auto& v : idx) v = static_cast<std::int32_t>(r.below(4)) + 1;
    double h1 = hemp::true_entropy(idx, 1);
    double h2 = hemp::true_entropy(idx, 2);
    CHECK(h2 <= 2.0 * h1 + 1e-9);
  }
}

TEST_CASE("subadditivity needs the pair-aligned prefix when a symbol is left over") {
  // 9 symbols: the pair view drops the last one, and comparing against the
  // full-stream singleton entropy flips the inequality
  std::vector<std::int32_t> idx = {1, 1, 1, 2, 2, 1, 2, 2, 1};
  double h2 = hemp::true_entropy(idx, 2);
  double h1_full = hemp::true_entropy(idx, 1);
  CHECK(h2 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(h2 > 2.0 * h1_full);  // the trap
  std::vector<std::int32_t> prefix(idx.begin(), idx.begin() + 8);
  double h1_covered = hemp::true_entropy(prefix, 1);
  CHECK(h2 <= 2.0 * h1_covered + 1e-12);
}

TEST_CASE("stationary position balances the two neighbor masses") {
  // three parameters pinned to each level plus one free coordinate: the
  // balance point of the free one is the exact middle
  Fixture f({0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.3}, {0.0, 1.0});
  std::optional<double> w_star = hemp::stationary_position(6, f.store, f.cbs);
  REQUIRE(w_star.has_value());
  CHECK(*w_star == doctest::Approx(0.5).epsilon(1e-12));
  f.store.set_flat(6, *w_star);
  TupleView view = hemp::group_tuples(f.store, 1);
  std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
  CHECK(std::abs(g[6]) < 1e-9);
}

TEST_CASE("stationary position agrees with a numeric root") {
  // an extra fractional parameter shifts the balance off center
  Fixture f({0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.3, 0.45}, {0.0, 1.0});
  std::optional<double> w_star = hemp::stationary_position(6, f.store, f.cbs);
  REQUIRE(w_star.has_value());

  TupleView view = hemp::group_tuples(f.store, 1);
  auto grad_at = [&](double w) {
    f.store.set_flat(6, w);
    return hemp::proxy_gradient(f.store, f.cbs, view)[6];
  };
  double lo = 1e-9, hi = 1.0 - 1e-9;
  REQUIRE(grad_at(lo) * grad_at(hi) < 0.0);
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (grad_at(lo) * grad_at(mid) <= 0.0 ? hi : lo) = mid;
  }
  CHECK(*w_star == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-6));
}

TEST_CASE("stationary position is empty at a population imbalance past one") {
  // all the aggregate mass on one side: no interior balance point
  Fixture f({0.0, 0.0, 0.0, 0.0, 0.0, 0.3}, {0.0, 1.0});
  CHECK_FALSE(hemp::stationary_position(5, f.store, f.cbs).has_value());
  // clamped coordinates never report one
  Fixture c({-9.0, 0.2, 0.8}, {0.0, 1.0});
  CHECK_FALSE(hemp::stationary_position(0, c.store, c.cbs).has_value());
}

TEST_CASE("gradient magnitude bound is tight at order one") {
  hemp::Rng r(36);
  for (int trial = 0; trial < 10; ++trial) {
    Fixture f = interior_fixture(40, 4, r);
    TupleView view = hemp::group_tuples(f.store, 1);
    std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
    for (std::size_t i = 0; i < f.store.total_count(); ++i) {
      double bound = hemp::gradient_bound(i, f.store, f.cbs);
      CHECK(std::abs(g[i]) <= bound + 1e-12);
      CHECK(bound == doctest::Approx(std::abs(g[i])).epsilon(1e-9));
    }
  }
}

TEST_CASE("gradient bound is zero for clamped coordinates") {
  Fixture f({-7.0, 0.5, 0.25}, {0.0, 1.0});
  CHECK(hemp::gradient_bound(0, f.store, f.cbs) == 0.0);
  CHECK(hemp::gradient_bound(1, f.store, f.cbs) > 0.0);
}

TEST_CASE("values sitting exactly on a level keep both log terms") {
  // coordinate 0 sits on the bottom level, coordinate 2 on the top one;
  // the one-sided derivative still reads log2(S-) - log2(S+) over the
  // bracketing interval, not just the surviving branch
  Fixture f({0.0, 0.0, 1.0, 0.25}, {0.0, 1.0});
  TupleView view = hemp::group_tuples(f.store, 1);
  std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
  // masses: S(1) = 1 + 1 + 0 + 0.75, S(2) = 0 + 0 + 1 + 0.25
  double expect = 0.25 * (std::log2(2.75) - std::log2(1.25));
  CHECK(g[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(expect).epsilon(1e-12));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(g[i]) <= hemp::gradient_bound(i, f.store, f.cbs) + 1e-12);
  }
}

TEST_CASE("gradient bound survives snapped and clamped coordinates") {
  hemp::Rng r(39);
  for (int trial = 0; trial < 10; ++trial) {
    Fixture f = interior_fixture(40, 4, r);
    const std::vector<double>& lv = f.cbs[0].levels;
    for (std::size_t i = 0; i < 40; i += 5) {
      f.store.set_flat(i, lv[r.below(lv.size())]);  // exactly on a level
    }
    f.store.set_flat(1, lv.front() - 1.0);
    f.store.set_flat(2, lv.back() + 1.0);
    TupleView view = hemp::group_tuples(f.store, 1);
    std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
    for (std::size_t i = 0; i < f.store.total_count(); ++i) {
      CHECK(std::abs(g[i]) <= hemp::gradient_bound(i, f.store, f.cbs) + 1e-12);
    }
  }
}

TEST_CASE("tiny support masses stay finite in the gradient") {
  // second coordinate nearly pinned: one joint entry gets ~1e-13 mass
  Fixture f({0.5, 1e-13, 0.25, 0.75}, {0.0, 1.0});
  TupleView view = hemp::group_tuples(f.store, 2);
  std::vector<double> g = hemp::proxy_gradient(f.store, f.cbs, view);
  for (double v : g) CHECK(std::isfinite(v));
  CHECK(std::isfinite(hemp::proxy_entropy(f.store, f.cbs, view)));
}

TEST_CASE("threaded evaluation matches sequential") {
  hemp::Rng r(37);
  Fixture f = interior_fixture(4200, 4, r);  // enough tuples to split
  for (int order : {1, 2, 3}) {
    TupleView view = hemp::group_tuples(f.store, order);
    double seq = hemp::proxy_entropy(f.store, f.cbs, view, nullptr, 1);
    double par = hemp::proxy_entropy(f.store, f.cbs, view, nullptr, 4);
    CHECK(par == doctest::Approx(seq).epsilon(1e-10));
    std::vector<double> gs = hemp::proxy_gradient(f.store, f.cbs, view, nullptr, 1);
    std::vector<double> gp = hemp::proxy_gradient(f.store, f.cbs, view, nullptr, 4);
    double worst = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i) worst = std::max(worst, std::abs(gs[i] - gp[i]));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("entropy report carries per-symbol figures") {
  hemp::Rng r(38);
  Fixture f = interior_fixture(64, 4, r);
  hemp::IndexMap idx = hemp::quantize_store(f.store, f.cbs);
  TupleView view = hemp::group_tuples(f.store, 2);
  hemp::EntropyReport rep = hemp::entropy_report(f.store, f.cbs, idx, view);
  CHECK(rep.order == 2);
  CHECK(rep.per_symbol_proxy == doctest::Approx(rep.h_proxy / 2.0));
  CHECK(rep.per_symbol_true == doctest::Approx(rep.h_true / 2.0));
  CHECK(rep.h_true == doctest::Approx(hemp::true_entropy(idx.flat(), 2)));
}

TEST_CASE("multi-layer stores mix codebooks in one tuple stream") {
  ParamStore s;
  s.add_layer("a", {3}, {0.25, 0.75, 0.5});
  s.add_layer("b", {3}, {10.0, 30.0, 20.0});
  std::vector<Codebook> cbs = {book(0, {0.0, 1.0}), book(1, {0.0, 40.0})};
  TupleView view = hemp::group_tuples(s, 2);
  double h = hemp::proxy_entropy(s, cbs, view);
  CHECK(std::isfinite(h));
  CHECK(h > 0.0);
  std::vector<double> g = hemp::proxy_gradient(s, cbs, view);
  // cross-layer tuple (positions 2,3) sees both codebooks
  for (std::size_t i : {2, 3}) {
    double delta = hemp::assign_neighbors(s.get_flat(i), cbs[static_cast<std::size_t>(
                                                             s.locate(i).layer_id)])
                       .delta;
    double fd = fd_gradient(s, cbs, view, i, 1e-6 * delta);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}
