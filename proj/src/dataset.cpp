#include "hemp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>

#include "hemp/errors.hpp"

namespace hemp {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(DataError::Kind::truncated, "truncated IDX header in " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::io, "cannot open " + path);
  return in;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = open_input(images_path);
  if (read_be32(img, images_path) != kImageMagic) {
    throw DataError(DataError::Kind::bad_magic, "not an IDX image file: " + images_path);
  }
  std::uint32_t count = read_be32(img, images_path);
  std::uint32_t rows = read_be32(img, images_path);
  std::uint32_t cols = read_be32(img, images_path);

  auto lab = open_input(labels_path);
  if (read_be32(lab, labels_path) != kLabelMagic) {
    throw DataError(DataError::Kind::bad_magic, "not an IDX label file: " + labels_path);
  }
  std::uint32_t lab_count = read_be32(lab, labels_path);
  if (lab_count != count) {
    throw DataError(DataError::Kind::count_mismatch,
                    "image/label count mismatch: " + std::to_string(count) + " vs " +
                        std::to_string(lab_count));
  }

  Dataset ds;
  ds.rows = static_cast<int>(rows);
  ds.cols = static_cast<int>(cols);
  std::size_t pixels = std::size_t(count) * rows * cols;
  std::vector<unsigned char> raw(pixels);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels))) {
    throw DataError(DataError::Kind::truncated, "truncated IDX image payload in " + images_path);
  }
  ds.images.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) ds.images[i] = static_cast<float>(raw[i]) / 255.0f;

  std::vector<unsigned char> lab_raw(count);
  if (!lab.read(reinterpret_cast<char*>(lab_raw.data()), static_cast<std::streamsize>(count))) {
    throw DataError(DataError::Kind::truncated, "truncated IDX label payload in " + labels_path);
  }
  ds.labels.assign(lab_raw.begin(), lab_raw.end());
  int mx = 0;
  for (std::int32_t l : ds.labels) mx = std::max(mx, l);
  ds.num_classes = mx + 1;
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw DataError(DataError::Kind::io, "cannot write " + images_path);
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.count()));
  write_be32(img, static_cast<std::uint32_t>(ds.rows));
  write_be32(img, static_cast<std::uint32_t>(ds.cols));
  std::vector<unsigned char> raw(ds.images.size());
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    float v = std::clamp(ds.images[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  img.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!img) throw DataError(DataError::Kind::io, "short write to " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError(DataError::Kind::io, "cannot write " + labels_path);
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(ds.count()));
  std::vector<unsigned char> lraw(ds.labels.size());
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    lraw[i] = static_cast<unsigned char>(ds.labels[i]);
  }
  lab.write(reinterpret_cast<const char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
  if (!lab) throw DataError(DataError::Kind::io, "short write to " + labels_path);
}

Dataset synth_gaussian_blobs(int classes, int per_class, int dim, std::uint64_t seed,
                             double spread) {
  if (classes < 2 || per_class < 1 || dim < 1) {
    throw std::invalid_argument("blobs need classes >= 2, per_class >= 1, dim >= 1");
  }
  Rng root(seed);
  // per-class centers: coordinates in {0.25, 0.75} by random sign pattern,
  // re-drawn on collision so every class is distinct
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < classes; ++c) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng r = root.fork("blob.center", static_cast<std::uint64_t>(c) * 977 + attempt);
      std::vector<double> ctr(static_cast<std::size_t>(dim));
      for (int k = 0; k < dim; ++k) ctr[static_cast<std::size_t>(k)] = (r.next_u64() & 1) ? 0.75 : 0.25;
      if (std::find(centers.begin(), centers.end(), ctr) == centers.end()) {
        centers.push_back(std::move(ctr));
        break;
      }
      if (attempt > 64) throw std::invalid_argument("cannot place distinct blob centers");
    }
  }

  Dataset ds;
  ds.rows = dim;
  ds.cols = 1;
  ds.num_classes = classes;
  ds.images.reserve(std::size_t(classes) * std::size_t(per_class) * std::size_t(dim));
  for (int c = 0; c < classes; ++c) {
    for (int j = 0; j < per_class; ++j) {
      Rng r = root.fork("blob.sample", std::uint64_t(c) * std::uint64_t(per_class) + std::uint64_t(j));
      for (int k = 0; k < dim; ++k) {
        double v = centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] +
                   spread * r.normal();
        ds.images.push_back(static_cast<float>(std::clamp(v, 0.0, 1.0)));
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

namespace {

struct Pt {
  double x, y;
};
using Polyline = std::vector<Pt>;

// ellipse arc, degrees, y axis pointing down; deg may run backwards
Polyline arc(double cx, double cy, double rx, double ry, double deg0, double deg1) {
  Polyline p;
  int steps = std::max(8, static_cast<int>(std::abs(deg1 - deg0) / 10.0));
  for (int i = 0; i <= steps; ++i) {
    double t = (deg0 + (deg1 - deg0) * i / steps) * 3.14159265358979323846 / 180.0;
    p.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return p;
}

Polyline seg(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y1}};
}

// stroke skeletons per digit in a unit box, y down
const std::vector<std::vector<Polyline>>& glyphs() {
  static const std::vector<std::vector<Polyline>> g = [] {
    std::vector<std::vector<Polyline>> v(10);
    v[0] = {arc(0.50, 0.50, 0.27, 0.36, 0, 360)};
    v[1] = {seg(0.52, 0.13, 0.52, 0.87), seg(0.38, 0.28, 0.52, 0.13), seg(0.40, 0.87, 0.64, 0.87)};
    v[2] = {arc(0.50, 0.34, 0.25, 0.20, 180, 360), seg(0.75, 0.34, 0.25, 0.85),
            seg(0.25, 0.85, 0.77, 0.85)};
    v[3] = {arc(0.47, 0.30, 0.22, 0.17, 210, 450), arc(0.47, 0.67, 0.24, 0.19, 270, 510)};
    v[4] = {seg(0.58, 0.12, 0.22, 0.62), seg(0.22, 0.62, 0.80, 0.62), seg(0.58, 0.12, 0.58, 0.88)};
    v[5] = {seg(0.72, 0.14, 0.30, 0.14), seg(0.30, 0.14, 0.28, 0.47), seg(0.28, 0.47, 0.34, 0.48),
            arc(0.46, 0.66, 0.24, 0.20, 230, 480)};
    v[6] = {arc(0.55, 0.50, 0.28, 0.33, 290, 90), arc(0.50, 0.67, 0.20, 0.17, 0, 360)};
    v[7] = {seg(0.22, 0.15, 0.78, 0.15), seg(0.78, 0.15, 0.40, 0.88)};
    v[8] = {arc(0.50, 0.31, 0.19, 0.16, 0, 360), arc(0.50, 0.67, 0.23, 0.19, 0, 360)};
    v[9] = {arc(0.50, 0.34, 0.21, 0.18, 0, 360), seg(0.71, 0.36, 0.60, 0.88)};
    return v;
  }();
  return g;
}

void render_digit(int label, Rng& rng, float* out28x28) {
  constexpr int kSide = 28;
  double canvas[kSide * kSide] = {0.0};

  // random affine: rotation, anisotropic scale, shear, translation
  double theta = rng.uniform(-0.20, 0.20);
  double sx = rng.uniform(0.85, 1.12), sy = rng.uniform(0.85, 1.12);
  double shear = rng.uniform(-0.15, 0.15);
  double tx = rng.uniform(-2.0, 2.0), ty = rng.uniform(-2.0, 2.0);
  double ct = std::cos(theta), st = std::sin(theta);
  auto map = [&](Pt p) {
    double x = (p.x - 0.5) * sx, y = (p.y - 0.5) * sy;
    x += shear * y;
    double xr = ct * x - st * y, yr = st * x + ct * y;
    return Pt{xr * 20.0 + 14.0 + tx, yr * 20.0 + 14.0 + ty};
  };

  auto stamp = [&](Pt p) {
    int cx = static_cast<int>(std::floor(p.x)), cy = static_cast<int>(std::floor(p.y));
    for (int yy = cy - 2; yy <= cy + 2; ++yy) {
      for (int xx = cx - 2; xx <= cx + 2; ++xx) {
        if (xx < 0 || yy < 0 || xx >= kSide || yy >= kSide) continue;
        double dx = p.x - (xx + 0.5), dy = p.y - (yy + 0.5);
        canvas[yy * kSide + xx] += 0.30 * std::exp(-(dx * dx + dy * dy) / (2.0 * 0.8 * 0.8));
      }
    }
  };

  for (const Polyline& pl : glyphs()[static_cast<std::size_t>(label)]) {
    for (std::size_t i = 0; i + 1 < pl.size(); ++i) {
      Pt a = map(pl[i]), b = map(pl[i + 1]);
      double len = std::hypot(b.x - a.x, b.y - a.y);
      int steps = std::max(1, static_cast<int>(len / 0.35));
      for (int s = 0; s <= steps; ++s) {
        double f = static_cast<double>(s) / steps;
        stamp({a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f});
      }
    }
  }

  for (int i = 0; i < kSide * kSide; ++i) {
    double v = std::min(1.0, canvas[i]);
    if (rng.uniform() < 0.03) v += rng.uniform(0.05, 0.25);  // background speckle
    out28x28[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
}

}  // namespace

Dataset synth_digits(int per_class, std::uint64_t seed) {
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  Rng root(seed);
  Dataset ds;
  ds.rows = 28;
  ds.cols = 28;
  ds.num_classes = 10;
  std::size_t count = static_cast<std::size_t>(per_class) * 10;
  ds.images.resize(count * 28 * 28);
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    int label = static_cast<int>(i % 10);  // interleaved so prefixes stay balanced
    Rng r = root.fork("digit", i);
    render_digit(label, r, ds.images.data() + i * 28 * 28);
    ds.labels[i] = label;
  }
  return ds;
}

namespace {

// class-balanced visiting order: shuffled per-class pools consumed round-robin
std::vector<std::size_t> stratified_order(const Dataset& ds, const Rng& rng) {
  std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.count(); ++i) {
    pools[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  std::size_t classes = pools.size();
  for (std::size_t c = 0; c < classes; ++c) {
    Rng r = rng.fork("stratify", c);
    r.shuffle(pools[c]);
  }
  std::vector<std::size_t> order;
  order.reserve(ds.count());
  std::vector<std::size_t> cursor(classes, 0);
  while (order.size() < ds.count()) {
    for (std::size_t cls = 0; cls < classes; ++cls) {
      if (cursor[cls] < pools[cls].size()) order.push_back(pools[cls][cursor[cls]++]);
    }
  }
  return order;
}

Dataset gather(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.num_classes = ds.num_classes;
  out.images.reserve(rows.size() * ds.dim());
  out.labels.reserve(rows.size());
  for (std::size_t i : rows) {
    const float* img = ds.image(i);
    out.images.insert(out.images.end(), img, img + ds.dim());
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

}  // namespace

Dataset stratified_subset(const Dataset& ds, std::size_t count, const Rng& rng) {
  if (count == 0 || count > ds.count()) throw std::invalid_argument("bad subset size");
  std::vector<std::size_t> order = stratified_order(ds, rng);
  return gather(ds, std::span<const std::size_t>(order.data(), count));
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, std::size_t first_count,
                                             const Rng& rng) {
  if (first_count == 0 || first_count >= ds.count()) {
    throw std::invalid_argument("split size must leave both parts non-empty");
  }
  std::vector<std::size_t> order = stratified_order(ds, rng);
  return {gather(ds, std::span<const std::size_t>(order.data(), first_count)),
          gather(ds, std::span<const std::size_t>(order.data() + first_count,
                                                  order.size() - first_count))};
}

}  // namespace hemp
