#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hemp/dataset.hpp"
#include "hemp/errors.hpp"
#include "hemp/rng.hpp"

using hemp::DataError;
using hemp::Dataset;

namespace {

struct TempPair {
  std::string img = "tmp_images_idx";
  std::string lbl = "tmp_labels_idx";
  ~TempPair() {
    std::remove(img.c_str());
    std::remove(lbl.c_str());
  }
};

void corrupt(const std::string& path, std::size_t offset, char value) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(f.good());
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(value);
}

void truncate_to(const std::string& path, std::size_t size) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> buf(size);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(buf.data(), static_cast<std::streamsize>(size));
}

// 1-nearest-centroid probe: train class means, classify a held-out set
double centroid_accuracy(const Dataset& train, const Dataset& test) {
  std::size_t dim = train.dim();
  std::vector<std::vector<double>> centroid(
      static_cast<std::size_t>(train.num_classes), std::vector<double>(dim, 0.0));
  std::vector<int> counts(static_cast<std::size_t>(train.num_classes), 0);
  for (std::size_t i = 0; i < train.count(); ++i) {
    auto& c = centroid[static_cast<std::size_t>(train.labels[i])];
    const float* img = train.image(i);
    for (std::size_t d = 0; d < dim; ++d) c[d] += img[d];
    ++counts[static_cast<std::size_t>(train.labels[i])];
  }
  for (int k = 0; k < train.num_classes; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      centroid[static_cast<std::size_t>(k)][d] /= std::max(1, counts[static_cast<std::size_t>(k)]);
    }
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test.count(); ++i) {
    const float* img = test.image(i);
    double best = 1e300;
    int arg = 0;
    for (int k = 0; k < train.num_classes; ++k) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double diff = img[d] - centroid[static_cast<std::size_t>(k)][d];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        arg = k;
      }
    }
    hit += arg == test.labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(test.count());
}

}  // namespace

TEST_CASE("idx files survive a write/load round trip bit for bit") {
  TempPair t;
  Dataset ds = hemp::synth_digits(3, 7);
  hemp::write_idx(ds, t.img, t.lbl);
  Dataset back = hemp::load_idx(t.img, t.lbl);
  CHECK(back.rows == ds.rows);
  CHECK(back.cols == ds.cols);
  CHECK(back.labels == ds.labels);
  REQUIRE(back.images.size() == ds.images.size());
  // pixels pass through a byte quantization on write; a second trip is exact
  hemp::write_idx(back, t.img, t.lbl);
  Dataset again = hemp::load_idx(t.img, t.lbl);
  CHECK(again.images == back.images);
  CHECK(again.labels == back.labels);
}

TEST_CASE("idx loader reports distinct failure kinds") {
  TempPair t;
  Dataset ds = hemp::synth_digits(2, 9);
  hemp::write_idx(ds, t.img, t.lbl);

  SUBCASE("missing file") {
    try {
      hemp::load_idx("definitely_not_here_idx", t.lbl);
      FAIL("expected a throw");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataError::Kind::io);
    }
  }
  SUBCASE("bad magic") {
    corrupt(t.img, 2, 0x55);
    try {
      hemp::load_idx(t.img, t.lbl);
      FAIL("expected a throw");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataError::Kind::bad_magic);
    }
  }
  SUBCASE("truncated payload") {
    truncate_to(t.img, 16 + 100);
    try {
      hemp::load_idx(t.img, t.lbl);
      FAIL("expected a throw");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataError::Kind::truncated);
    }
  }
  SUBCASE("image/label count mismatch") {
    TempPair fewer_files;
    fewer_files.img = "tmp_fewer_images_idx";
    fewer_files.lbl = "tmp_fewer_labels_idx";
    Dataset fewer = hemp::stratified_subset(ds, ds.count() - 2, hemp::Rng(1));
    hemp::write_idx(fewer, fewer_files.img, fewer_files.lbl);
    try {
      hemp::load_idx(t.img, fewer_files.lbl);  // full images, short labels
      FAIL("expected a throw");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataError::Kind::count_mismatch);
    }
  }
}

TEST_CASE("gaussian blobs are deterministic and separable") {
  Dataset a = hemp::synth_gaussian_blobs(4, 100, 16, 123);
  Dataset b = hemp::synth_gaussian_blobs(4, 100, 16, 123);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  Dataset c = hemp::synth_gaussian_blobs(4, 100, 16, 124);
  CHECK(a.images != c.images);

  CHECK(a.count() == 400);
  CHECK(a.num_classes == 4);
  for (float v : a.images) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // the class centers depend on the seed, so held-out data has to come from
  // the same generation
  auto [train, holdout] = hemp::stratified_split(a, 200, hemp::Rng(7));
  CHECK(centroid_accuracy(train, holdout) >= 0.99);
}

TEST_CASE("stratified split is disjoint and exhaustive") {
  Dataset ds = hemp::synth_digits(20, 15);
  auto [first, second] = hemp::stratified_split(ds, 120, hemp::Rng(5));
  CHECK(first.count() == 120);
  CHECK(second.count() == 80);
  std::vector<int> per_class(10, 0);
  for (auto l : first.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int c : per_class) CHECK(c == 12);

  // every original image appears exactly once across the two parts
  auto key = [&](const Dataset& d, std::size_t i) {
    std::string k(reinterpret_cast<const char*>(d.image(i)), d.dim() * sizeof(float));
    return k;
  };
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < first.count(); ++i) seen.push_back(key(first, i));
  for (std::size_t i = 0; i < second.count(); ++i) seen.push_back(key(second, i));
  std::sort(seen.begin(), seen.end());
  std::vector<std::string> orig;
  for (std::size_t i = 0; i < ds.count(); ++i) orig.push_back(key(ds, i));
  std::sort(orig.begin(), orig.end());
  CHECK(seen == orig);

  CHECK_THROWS(hemp::stratified_split(ds, 0, hemp::Rng(1)));
  CHECK_THROWS(hemp::stratified_split(ds, ds.count(), hemp::Rng(1)));
}

TEST_CASE("digit renderings look like a usable classification corpus") {
  Dataset ds = hemp::synth_digits(20, 5);
  CHECK(ds.rows == 28);
  CHECK(ds.cols == 28);
  CHECK(ds.count() == 200);
  CHECK(ds.num_classes == 10);
  std::vector<int> per_class(10, 0);
  for (auto l : ds.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int c : per_class) CHECK(c == 20);
  for (float v : ds.images) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // images are mostly background with a real stroke on top
  double mean = 0.0;
  float peak = 0.0f;
  for (float v : ds.images) {
    mean += v;
    peak = std::max(peak, v);
  }
  mean /= static_cast<double>(ds.images.size());
  CHECK(mean > 0.01);
  CHECK(mean < 0.5);
  CHECK(peak > 0.9f);

  CHECK(hemp::synth_digits(20, 5).images == ds.images);  // deterministic
  CHECK(hemp::synth_digits(20, 6).images != ds.images);

  // class-informative: a centroid probe beats chance by a wide margin
  Dataset train = hemp::synth_digits(100, 41);
  Dataset test = hemp::synth_digits(30, 42);
  CHECK(centroid_accuracy(train, test) >= 0.6);
}

TEST_CASE("stratified subsets balance classes and stay deterministic") {
  Dataset ds = hemp::synth_digits(30, 11);
  hemp::Rng r(2);
  Dataset sub = hemp::stratified_subset(ds, 100, r);
  CHECK(sub.count() == 100);
  std::vector<int> per_class(10, 0);
  for (auto l : sub.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int c : per_class) CHECK(c == 10);

  hemp::Rng r2(2);
  Dataset sub2 = hemp::stratified_subset(ds, 100, r2);
  CHECK(sub.images == sub2.images);

  CHECK_THROWS(hemp::stratified_subset(ds, 0, r));
  CHECK_THROWS(hemp::stratified_subset(ds, ds.count() + 1, r));
}

TEST_CASE("uneven subset sizes round-robin across classes") {
  Dataset ds = hemp::synth_digits(30, 13);
  hemp::Rng r(3);
  Dataset sub = hemp::stratified_subset(ds, 97, r);
  CHECK(sub.count() == 97);
  std::vector<int> per_class(10, 0);
  for (auto l : sub.labels) ++per_class[static_cast<std::size_t>(l)];
  int lo = *std::min_element(per_class.begin(), per_class.end());
  int hi = *std::max_element(per_class.begin(), per_class.end());
  CHECK(hi - lo <= 1);
}
