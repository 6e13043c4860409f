// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>

#include "kpdet/error.hpp"
#include "kpdet/model.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight I/O assumes a little-endian host");

namespace kpdet {
namespace {

constexpr char kMagic[4] = {'K', 'P', 'N', 'W'};
constexpr int kMaxRank = 8;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T v;
    std::memcpy(&v, take(sizeof(T), what), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > remaining()) {
      throw Error(ErrorCode::kTruncated, std::string("weight stream truncated while reading ") +
                                             what + " at offset " + std::to_string(pos_));
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t offset() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct Slot {
  std::vector<std::uint32_t> dims;
  std::vector<float>* data;
};

std::map<std::string, Slot> weight_slots(LayerGraph& graph) {
  std::map<std::string, Slot> slots;
  for (Node& node : graph.mutable_nodes()) {
    if (node.kind != OpKind::kConv) continue;
    ConvParams& p = node.conv;
    slots[node.name + ".weight"] = Slot{
        {static_cast<std::uint32_t>(p.out_channels), static_cast<std::uint32_t>(p.in_channels),
         static_cast<std::uint32_t>(p.kernel_h), static_cast<std::uint32_t>(p.kernel_w)},
        &p.weights};
    if (!p.bias.empty()) {
      slots[node.name + ".bias"] = Slot{{static_cast<std::uint32_t>(p.out_channels)}, &p.bias};
    }
  }
  return slots;
}

std::string dims_str(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

void write_tensor(Writer& w, const std::string& name, const std::vector<std::uint32_t>& dims,
                  const std::vector<float>& data) {
  w.put(static_cast<std::uint16_t>(name.size()));
  w.put_bytes(name.data(), name.size());
  w.put(static_cast<std::uint8_t>(dims.size()));
  for (std::uint32_t d : dims) w.put(d);
  w.put_bytes(data.data(), data.size() * sizeof(float));
}

}  // namespace

std::vector<std::uint8_t> save_weights(const LayerGraph& graph) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(kWeightFormatVersion);
  std::uint32_t count = 0;
  for (const Node& node : graph.nodes()) {
    if (node.kind == OpKind::kConv) count += node.conv.bias.empty() ? 1 : 2;
  }
  w.put(count);
  // Node order, weight before bias.
  for (const Node& node : graph.nodes()) {
    if (node.kind != OpKind::kConv) continue;
    const ConvParams& p = node.conv;
    write_tensor(w, node.name + ".weight",
                 {static_cast<std::uint32_t>(p.out_channels),
                  static_cast<std::uint32_t>(p.in_channels),
                  static_cast<std::uint32_t>(p.kernel_h), static_cast<std::uint32_t>(p.kernel_w)},
                 p.weights);
    if (!p.bias.empty()) {
      write_tensor(w, node.name + ".bias", {static_cast<std::uint32_t>(p.out_channels)}, p.bias);
    }
  }
  return w.take();
}

LayerGraph load_weights(const LayerGraph& graph, std::span<const std::uint8_t> bytes) {
  LayerGraph out = graph;
  auto slots = weight_slots(out);
  Reader r(bytes);

  const std::uint8_t* magic = r.take(sizeof(kMagic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kBadMagic, "weight stream does not start with KPNW");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kWeightFormatVersion) {
    throw Error(ErrorCode::kBadVersion,
                "unsupported weight format version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");

  std::set<std::string> seen;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint16_t>("name length");
    const std::uint8_t* name_ptr = r.take(name_len, "tensor name");
    std::string name(reinterpret_cast<const char*>(name_ptr), name_len);
    const auto rank = r.get<std::uint8_t>("rank");
    if (rank == 0 || rank > kMaxRank) {
      throw Error(ErrorCode::kMalformed,
                  "tensor '" + name + "' has invalid rank " + std::to_string(rank));
    }
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.get<std::uint32_t>("dims");

    auto it = slots.find(name);
    if (it == slots.end()) {
      throw Error(ErrorCode::kMalformed, "unknown tensor '" + name + "' in weight stream");
    }
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kMalformed, "duplicate tensor '" + name + "' in weight stream");
    }
    if (dims != it->second.dims) {
      throw Error(ErrorCode::kShapeMismatch, "tensor '" + name + "' has shape " + dims_str(dims) +
                                                 ", graph expects " +
                                                 dims_str(it->second.dims));
    }
    std::vector<float>& data = *it->second.data;
    const std::uint8_t* payload = r.take(data.size() * sizeof(float), "tensor data");
    std::memcpy(data.data(), payload, data.size() * sizeof(float));
    for (float v : data) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kMalformed, "tensor '" + name + "' holds a non-finite value");
      }
    }
  }

  if (r.remaining() != 0) {
    throw Error(ErrorCode::kMalformed, std::to_string(r.remaining()) +
                                           " trailing bytes after the last tensor");
  }
  for (const auto& [name, slot] : slots) {
    if (!seen.count(name)) {
      throw Error(ErrorCode::kMissingTensor, "weight stream lacks tensor '" + name + "'");
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "error reading '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "error writing '" + path + "'");
}

}  // namespace kpdet
