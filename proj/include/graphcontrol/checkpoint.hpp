#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/nn.hpp"

// Checkpoint layout (all integers and floats little-endian):
//   magic "GCCKPT01" | u32 format_version | u32 k | u32 l | u32 layers
//   u32 metadata_len | metadata (UTF-8 JSON: config, dataset, loss curve)
//   u32 tensor_count, then per tensor: u32 name_len | name | u32 rows | u32 cols | f32[rows*cols]

namespace graphcontrol {

inline constexpr std::array<char, 8> kCheckpointMagic{'G', 'C', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  GinEncoder<float> encoder;
  nlohmann::json config;  // the pre-training configuration that produced it
  std::string dataset;
  std::vector<double> loss_curve;
  std::uint32_t format_version = kCheckpointVersion;

  std::size_t positional_dim() const { return encoder.input_dim(); }
  std::size_t embedding_dim() const { return encoder.output_dim(); }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint and cache I/O assume a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError(std::string("truncated file while reading ") + what);
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_u32(out, ckpt.format_version);
  detail::write_u32(out, static_cast<std::uint32_t>(ckpt.positional_dim()));
  detail::write_u32(out, static_cast<std::uint32_t>(ckpt.embedding_dim()));
  detail::write_u32(out, static_cast<std::uint32_t>(ckpt.encoder.layers.size()));
  const std::string meta =
      nlohmann::json{{"config", ckpt.config}, {"dataset", ckpt.dataset}, {"loss_curve", ckpt.loss_curve}}.dump();
  detail::write_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  auto encoder = ckpt.encoder;
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  encoder.visit("encoder", [&](const std::string& name, Tensor<float>& t) { tensors.emplace_back(name, &t); });
  detail::write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (auto& [name, t] : tensors) {
    detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(t->rows()));
    detail::write_u32(out, static_cast<std::uint32_t>(t->cols()));
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
  }
}

struct CheckpointDims {
  std::size_t positional_dim;
  std::size_t embedding_dim;
  std::size_t layers;
};

/// Reads a checkpoint; when `expected` is given, mismatching k/l/layers are
/// rejected.
inline Checkpoint read_checkpoint(std::istream& in, std::optional<CheckpointDims> expected = std::nullopt) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw DataError("not a checkpoint file (bad magic)");
  Checkpoint ckpt;
  ckpt.format_version = detail::read_u32(in, "version");
  if (ckpt.format_version != kCheckpointVersion)
    throw DataError("unsupported checkpoint format version " + std::to_string(ckpt.format_version));
  const auto k = detail::read_u32(in, "k");
  const auto l = detail::read_u32(in, "l");
  const auto layers = detail::read_u32(in, "layers");
  if (expected && (k != expected->positional_dim || l != expected->embedding_dim || layers != expected->layers)) {
    std::ostringstream msg;
    msg << "checkpoint dimension mismatch: file has k=" << k << " l=" << l << " layers=" << layers << ", expected k="
        << expected->positional_dim << " l=" << expected->embedding_dim << " layers=" << expected->layers;
    throw DataError(msg.str());
  }
  std::string meta(detail::read_u32(in, "metadata length"), '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta.size()))) throw DataError("truncated checkpoint metadata");
  try {
    const auto j = nlohmann::json::parse(meta);
    ckpt.config = j.at("config");
    ckpt.dataset = j.at("dataset").get<std::string>();
    ckpt.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint metadata: ") + e.what());
  }

  ckpt.encoder = GinEncoder<float>::zeros(k, l, layers);
  std::vector<std::pair<std::string, Tensor<float>*>> tensors;
  ckpt.encoder.visit("encoder", [&](const std::string& name, Tensor<float>& t) { tensors.emplace_back(name, &t); });
  const auto count = detail::read_u32(in, "tensor count");
  if (count != tensors.size())
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, expected " + std::to_string(tensors.size()));
  for (auto& [name, t] : tensors) {
    std::string stored(detail::read_u32(in, "tensor name length"), '\0');
    in.read(stored.data(), static_cast<std::streamsize>(stored.size()));
    const auto rows = detail::read_u32(in, "rows");
    const auto cols = detail::read_u32(in, "cols");
    if (stored != name || rows != t->rows() || cols != t->cols())
      throw DataError("checkpoint tensor '" + stored + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
                      ") does not match expected '" + name + "' (" + std::to_string(t->rows()) + "x" +
                      std::to_string(t->cols()) + ")");
    if (!in.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float))))
      throw DataError("truncated tensor data for " + name);
  }
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<CheckpointDims> expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  return read_checkpoint(in, expected);
}

}  // namespace graphcontrol
