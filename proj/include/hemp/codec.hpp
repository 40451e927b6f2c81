#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hemp/lloyd.hpp"
#include "hemp/param_store.hpp"

namespace hemp {

// Quantized model ready for serialization: per-layer codebooks (float32)
// plus 1-based index streams. `order` is the tuple order the model was
// trained with; the coder conditions each symbol on the previous order-1
// symbols of its layer stream.
struct ModelArchive {
  int order = 1;

  struct Layer {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> levels;
    std::vector<std::int32_t> indices;  // product(shape) entries in [1, levels.size()]
  };
  std::vector<Layer> layers;

  std::size_t total_symbols() const;
};

// Container layout (all integers little-endian unless noted):
//   magic "HEMP" | u8 version=1 | u8 order | u16 layer_count
//   per layer: u16 name_len, name | u8 rank, rank*u32 dims
//              u16 N, N*f32 levels | u32 payload_len, payload
//   u32 CRC-32 (zlib polynomial) of everything before it
// Encoding is deterministic: same archive, same bytes.
std::vector<std::uint8_t> encode(const ModelArchive& archive);
ModelArchive decode(std::span<const std::uint8_t> bytes);

// Everything except the coded payload bytes; what a container costs before
// any symbol is written. Used for size estimates.
std::size_t header_bytes(const ModelArchive& archive);

// One byte per symbol (index - 1), layers concatenated in order; feed this
// to an external compressor for comparisons. Rejects N > 256.
// layer_offsets (optional) receives each layer's start offset.
std::vector<std::uint8_t> export_raw_indices(const ModelArchive& archive,
                                             std::vector<std::size_t>* layer_offsets = nullptr);

ModelArchive make_archive(const ParamStore& store, const std::vector<Codebook>& codebooks,
                          const IndexMap& indices, int order);

// Store with reconstructed (level) values plus the codebooks, for eval.
std::pair<ParamStore, std::vector<Codebook>> restore_store(const ModelArchive& archive);

// Continuous checkpoint (float64 values, no quantization):
//   magic "HMPC" | u8 version=1 | u16 layer_count
//   per layer: u16 name_len, name | u8 rank, rank*u32 dims | count*f64 values
//   u32 CRC-32
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace hemp
