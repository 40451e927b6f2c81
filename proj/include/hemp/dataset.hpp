#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hemp/rng.hpp"

namespace hemp {

struct Dataset {
  int rows = 0;
  int cols = 0;
  std::vector<float> images;         // count*rows*cols values in [0,1]
  std::vector<std::int32_t> labels;  // one per image
  int num_classes = 0;

  std::size_t count() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  const float* image(std::size_t i) const { return images.data() + i * dim(); }
};

// IDX (big-endian) image/label pair, pixels scaled to [0,1].
// Throws DataError: io (unreadable), bad_magic, truncated,
// count_mismatch (images vs labels disagree).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_idx; pixels are rounded back to bytes, so a loaded
// dataset survives a write/load round trip bit for bit.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// Gaussian clusters around per-class centers with coordinates in
// {0.25, 0.75} (distinct sign patterns per class), clipped to [0,1].
// Deterministic in seed; linearly separable at the default spread.
Dataset synth_gaussian_blobs(int classes, int per_class, int dim, std::uint64_t seed,
                             double spread = 0.1);

// Procedurally rendered 28x28 digit glyphs (strokes + random affine jitter
// + pixel noise), 10 classes. A fully offline stand-in for handwritten
// digit corpora with the same shape and value range.
Dataset synth_digits(int per_class, std::uint64_t seed);

// Seeded class-stratified subsample of `count` elements.
Dataset stratified_subset(const Dataset& ds, std::size_t count, const Rng& rng);

// Disjoint class-stratified split: `first_count` samples in the first part,
// everything else in the second. Use this to carve train/test out of one
// generated corpus so both halves share its class geometry.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, std::size_t first_count,
                                             const Rng& rng);

}  // namespace hemp
