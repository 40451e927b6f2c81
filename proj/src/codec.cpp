#include "hemp/codec.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "hemp/errors.hpp"

namespace hemp {

namespace {

// ---- byte-level writers/readers ----------------------------------------

struct Writer {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
};

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw FormatError(FormatError::Kind::truncated, "container truncated");
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = bytes.subspan(pos, n);
    pos += n;
    return s;
  }
};

std::uint32_t crc_of(std::span<const std::uint8_t> b) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(b.data()), static_cast<uInt>(b.size())));
}

// ---- carryless range coder (Subbotin style) -----------------------------

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kBot = 1u << 16;

class RangeEncoder {
 public:
  explicit RangeEncoder(std::vector<std::uint8_t>& out) : out_(out) {}

  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t tot) {
    range_ /= tot;
    low_ += cum * range_;
    range_ *= freq;
    while ((low_ ^ (low_ + range_)) < kTop ||
           (range_ < kBot && ((range_ = (0 - low_) & (kBot - 1)), true))) {
      out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
      low_ <<= 8;
      range_ <<= 8;
    }
  }

  void flush() {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
      low_ <<= 8;
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  std::uint32_t decode_target(std::uint32_t tot) {
    range_ /= tot;
    std::uint32_t t = (code_ - low_) / range_;
    return t >= tot ? tot - 1 : t;
  }

  void decode_update(std::uint32_t cum, std::uint32_t freq) {
    low_ += cum * range_;
    range_ *= freq;
    while ((low_ ^ (low_ + range_)) < kTop ||
           (range_ < kBot && ((range_ = (0 - low_) & (kBot - 1)), true))) {
      code_ = (code_ << 8) | next_byte();
      low_ <<= 8;
      range_ <<= 8;
    }
  }

 private:
  std::uint8_t next_byte() {
    // zero-fill past the end: the encoder's flush wrote the live bytes
    return pos_ < in_.size() ? in_[pos_++] : 0;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// ---- adaptive context model ---------------------------------------------

// Laplace counts per context (all start at 1), halved when the total would
// reach the coder's 2^16 frequency ceiling. Contexts are the previous
// (order-1) symbols of the layer stream, packed base (N+1) with 0 meaning
// "before the start"; they reset at layer boundaries.
class ContextModel {
 public:
  ContextModel(int nsym, int order) : nsym_(nsym), ctx_len_(order - 1) {
    double width = 1.0;
    for (int i = 0; i < ctx_len_; ++i) {
      width *= static_cast<double>(nsym_ + 1);
      if (width > 1e18) throw FormatError(FormatError::Kind::bad_field, "context order too large");
    }
  }

  void push(std::int32_t sym) {  // sym in [0, nsym)
    history_.push_back(sym);
    if (static_cast<int>(history_.size()) > ctx_len_) history_.erase(history_.begin());
  }

  std::uint64_t context_key() const {
    std::uint64_t key = 0;
    std::size_t have = history_.size();
    for (int i = 0; i < ctx_len_; ++i) {
      std::uint64_t digit =
          (i < static_cast<int>(have)) ? static_cast<std::uint64_t>(history_[have - 1 - i] + 1) : 0;
      key = key * static_cast<std::uint64_t>(nsym_ + 1) + digit;
    }
    return key;
  }

  struct Freq {
    std::uint32_t cum, freq, tot;
  };

  Freq lookup(std::int32_t sym) {
    auto& c = counts(context_key());
    Freq f{0, c[static_cast<std::size_t>(sym)], 0};
    for (int s = 0; s < nsym_; ++s) {
      if (s < sym) f.cum += c[static_cast<std::size_t>(s)];
      f.tot += c[static_cast<std::size_t>(s)];
    }
    return f;
  }

  std::int32_t find(std::uint32_t target, Freq& out) {
    auto& c = counts(context_key());
    std::uint32_t tot = 0;
    for (int s = 0; s < nsym_; ++s) tot += c[static_cast<std::size_t>(s)];
    std::uint32_t cum = 0;
    for (int s = 0; s < nsym_; ++s) {
      std::uint32_t f = c[static_cast<std::size_t>(s)];
      if (target < cum + f) {
        out = {cum, f, tot};
        return s;
      }
      cum += f;
    }
    throw FormatError(FormatError::Kind::bad_field, "range decoder target out of model");
  }

  std::uint32_t total() {
    auto& c = counts(context_key());
    std::uint32_t tot = 0;
    for (std::uint32_t f : c) tot += f;
    return tot;
  }

  void update(std::int32_t sym) {
    auto& c = counts(context_key());
    c[static_cast<std::size_t>(sym)] += 1;
    std::uint32_t tot = 0;
    for (std::uint32_t f : c) tot += f;
    if (tot >= kBot) {
      for (auto& f : c) f = (f + 1) >> 1;
    }
    push(sym);
  }

 private:
  std::vector<std::uint32_t>& counts(std::uint64_t key) {
    auto it = table_.find(key);
    if (it == table_.end()) {
      it = table_.emplace(key, std::vector<std::uint32_t>(static_cast<std::size_t>(nsym_), 1)).first;
    }
    return it->second;
  }

  int nsym_;
  int ctx_len_;
  std::vector<std::int32_t> history_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> table_;
};

std::vector<std::uint8_t> encode_layer(const ModelArchive::Layer& layer, int order) {
  int nsym = static_cast<int>(layer.levels.size());
  std::vector<std::uint8_t> payload;
  RangeEncoder enc(payload);
  ContextModel model(nsym, order);
  for (std::int32_t idx : layer.indices) {
    if (idx < 1 || idx > nsym) {
      throw FormatError(FormatError::Kind::bad_field, "index outside codebook in " + layer.name);
    }
    std::int32_t sym = idx - 1;
    auto f = model.lookup(sym);
    enc.encode(f.cum, f.freq, f.tot);
    model.update(sym);
  }
  enc.flush();
  return payload;
}

std::vector<std::int32_t> decode_layer(std::span<const std::uint8_t> payload, std::size_t count,
                                       int nsym, int order) {
  std::vector<std::int32_t> out;
  out.reserve(count);
  RangeDecoder dec(payload);
  ContextModel model(nsym, order);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t tot = model.total();
    std::uint32_t target = dec.decode_target(tot);
    ContextModel::Freq f{};
    std::int32_t sym = model.find(target, f);
    dec.decode_update(f.cum, f.freq);
    model.update(sym);
    out.push_back(sym + 1);
  }
  return out;
}

std::size_t layer_symbols(const ModelArchive::Layer& l) {
  std::size_t n = 1;
  for (std::uint32_t d : l.shape) n *= d;
  return n;
}

}  // namespace

std::size_t ModelArchive::total_symbols() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.indices.size();
  return n;
}

std::size_t header_bytes(const ModelArchive& archive) {
  std::size_t n = 4 + 1 + 1 + 2 + 4;  // magic, version, order, layer count, crc
  for (const auto& l : archive.layers) {
    n += 2 + l.name.size() + 1 + 4 * l.shape.size() + 2 + 4 * l.levels.size() + 4;
  }
  return n;
}

std::vector<std::uint8_t> encode(const ModelArchive& archive) {
  if (archive.order < 1 || archive.order > 255) {
    throw FormatError(FormatError::Kind::bad_field, "order must be in [1, 255]");
  }
  if (archive.layers.empty() || archive.layers.size() > 0xFFFF) {
    throw FormatError(FormatError::Kind::bad_field, "layer count out of range");
  }
  Writer w;
  w.raw("HEMP", 4);
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(archive.order));
  w.u16(static_cast<std::uint16_t>(archive.layers.size()));
  for (const auto& l : archive.layers) {
    if (l.name.size() > 0xFFFF) throw FormatError(FormatError::Kind::bad_field, "layer name too long");
    if (l.shape.empty() || l.shape.size() > 255) {
      throw FormatError(FormatError::Kind::bad_field, "layer rank out of range");
    }
    if (l.levels.empty() || l.levels.size() > 0xFFFF) {
      throw FormatError(FormatError::Kind::bad_field, "level count out of range");
    }
    if (l.indices.size() != layer_symbols(l)) {
      throw FormatError(FormatError::Kind::bad_field, "index count does not match shape");
    }
    w.u16(static_cast<std::uint16_t>(l.name.size()));
    w.raw(l.name.data(), l.name.size());
    w.u8(static_cast<std::uint8_t>(l.shape.size()));
    for (std::uint32_t d : l.shape) w.u32(d);
    w.u16(static_cast<std::uint16_t>(l.levels.size()));
    for (float v : l.levels) w.f32(v);
    auto payload = encode_layer(l, archive.order);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.raw(payload.data(), payload.size());
  }
  w.u32(crc_of(w.bytes));
  return std::move(w.bytes);
}

ModelArchive decode(std::span<const std::uint8_t> bytes) {
  // pass 1: walk the structure (lengths only) so truncation is reported as
  // truncation; then the checksum; payloads are decoded only after both pass
  Reader r{bytes};
  auto magic = r.raw(4);
  if (std::memcmp(magic.data(), "HEMP", 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, "not a HEMP container");
  }
  std::uint8_t version = r.u8();
  if (version != 1) {
    throw FormatError(FormatError::Kind::bad_version,
                      "unsupported container version " + std::to_string(version));
  }
  ModelArchive a;
  a.order = r.u8();
  if (a.order < 1) throw FormatError(FormatError::Kind::bad_field, "order must be >= 1");
  std::uint16_t layer_count = r.u16();
  if (layer_count == 0) throw FormatError(FormatError::Kind::bad_field, "container has no layers");
  std::vector<std::span<const std::uint8_t>> payloads;
  for (std::uint16_t i = 0; i < layer_count; ++i) {
    ModelArchive::Layer l;
    std::uint16_t name_len = r.u16();
    auto nb = r.raw(name_len);
    l.name.assign(reinterpret_cast<const char*>(nb.data()), nb.size());
    std::uint8_t rank = r.u8();
    if (rank == 0) throw FormatError(FormatError::Kind::bad_field, "layer rank must be >= 1");
    for (std::uint8_t d = 0; d < rank; ++d) l.shape.push_back(r.u32());
    std::uint16_t n_levels = r.u16();
    if (n_levels == 0) throw FormatError(FormatError::Kind::bad_field, "layer has no levels");
    for (std::uint16_t k = 0; k < n_levels; ++k) l.levels.push_back(r.f32());
    std::uint32_t payload_len = r.u32();
    payloads.push_back(r.raw(payload_len));
    a.layers.push_back(std::move(l));
  }
  std::uint32_t stored_crc = r.u32();
  if (r.pos != bytes.size()) {
    throw FormatError(FormatError::Kind::bad_field, "trailing bytes after container");
  }
  if (stored_crc != crc_of(bytes.subspan(0, bytes.size() - 4))) {
    throw FormatError(FormatError::Kind::checksum, "container checksum mismatch");
  }
  for (std::uint16_t i = 0; i < layer_count; ++i) {
    auto& l = a.layers[i];
    l.indices = decode_layer(payloads[i], layer_symbols(l), static_cast<int>(l.levels.size()),
                             a.order);
  }
  return a;
}

std::vector<std::uint8_t> export_raw_indices(const ModelArchive& archive,
                                             std::vector<std::size_t>* layer_offsets) {
  std::vector<std::uint8_t> out;
  out.reserve(archive.total_symbols());
  if (layer_offsets) layer_offsets->clear();
  for (const auto& l : archive.layers) {
    if (l.levels.size() > 256) {
      throw FormatError(FormatError::Kind::bad_field, "raw export limited to N <= 256");
    }
    if (layer_offsets) layer_offsets->push_back(out.size());
    for (std::int32_t idx : l.indices) {
      if (idx < 1 || idx > static_cast<std::int32_t>(l.levels.size())) {
        throw FormatError(FormatError::Kind::bad_field, "index outside codebook");
      }
      out.push_back(static_cast<std::uint8_t>(idx - 1));
    }
  }
  return out;
}

ModelArchive make_archive(const ParamStore& store, const std::vector<Codebook>& codebooks,
                          const IndexMap& indices, int order) {
  if (codebooks.size() != store.layer_count() || indices.layers.size() != store.layer_count()) {
    throw std::invalid_argument("layer count mismatch");
  }
  ModelArchive a;
  a.order = order;
  for (std::size_t i = 0; i < store.layer_count(); ++i) {
    const auto& sl = store.layer(static_cast<int>(i));
    ModelArchive::Layer l;
    l.name = sl.name;
    for (int d : sl.shape) l.shape.push_back(static_cast<std::uint32_t>(d));
    for (double v : codebooks[i].levels) l.levels.push_back(static_cast<float>(v));
    l.indices = indices.layers[i];
    a.layers.push_back(std::move(l));
  }
  return a;
}

std::pair<ParamStore, std::vector<Codebook>> restore_store(const ModelArchive& archive) {
  ParamStore store;
  std::vector<Codebook> codebooks;
  for (const auto& l : archive.layers) {
    std::vector<int> shape;
    for (std::uint32_t d : l.shape) shape.push_back(static_cast<int>(d));
    Codebook cb;
    cb.layer_id = static_cast<int>(codebooks.size());
    for (float v : l.levels) cb.levels.push_back(static_cast<double>(v));
    std::vector<double> values(l.indices.size());
    for (std::size_t i = 0; i < l.indices.size(); ++i) {
      std::int32_t q = l.indices[i];
      if (q < 1 || q > cb.level_count()) {
        throw FormatError(FormatError::Kind::bad_field, "index outside codebook");
      }
      values[i] = cb.levels[static_cast<std::size_t>(q - 1)];
    }
    store.add_layer(l.name, shape, std::move(values));
    codebooks.push_back(std::move(cb));
  }
  return {std::move(store), std::move(codebooks)};
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
  Writer w;
  w.raw("HMPC", 4);
  w.u8(1);
  w.u16(static_cast<std::uint16_t>(store.layer_count()));
  for (const auto& l : store.layers()) {
    w.u16(static_cast<std::uint16_t>(l.name.size()));
    w.raw(l.name.data(), l.name.size());
    w.u8(static_cast<std::uint8_t>(l.shape.size()));
    for (int d : l.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : l.values) w.f64(v);
  }
  w.u32(crc_of(w.bytes));
  write_file(path, w.bytes);
}

ParamStore load_checkpoint(const std::string& path) {
  auto bytes = read_file(path);
  Reader r{bytes};
  auto magic = r.raw(4);
  if (std::memcmp(magic.data(), "HMPC", 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, "not a checkpoint file: " + path);
  }
  if (r.u8() != 1) throw FormatError(FormatError::Kind::bad_version, "unsupported checkpoint version");
  std::uint16_t layer_count = r.u16();
  ParamStore store;
  for (std::uint16_t i = 0; i < layer_count; ++i) {
    std::uint16_t name_len = r.u16();
    auto nb = r.raw(name_len);
    std::string name(reinterpret_cast<const char*>(nb.data()), nb.size());
    std::uint8_t rank = r.u8();
    std::vector<int> shape;
    std::size_t count = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      std::uint32_t dim = r.u32();
      shape.push_back(static_cast<int>(dim));
      count *= dim;
    }
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) values[k] = r.f64();
    store.add_layer(name, shape, std::move(values));
  }
  std::uint32_t stored_crc = r.u32();
  if (r.pos != bytes.size()) {
    throw FormatError(FormatError::Kind::bad_field, "trailing bytes after checkpoint");
  }
  if (stored_crc != crc_of(std::span<const std::uint8_t>(bytes).subspan(0, bytes.size() - 4))) {
    throw FormatError(FormatError::Kind::checksum, "checkpoint checksum mismatch");
  }
  return store;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataError::Kind::io, "short write to " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError(DataError::Kind::io, "cannot open " + path);
  std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw DataError(DataError::Kind::io, "cannot read " + path);
  }
  return bytes;
}

}  // namespace hemp
