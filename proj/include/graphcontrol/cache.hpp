#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphcontrol/checkpoint.hpp"
#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"

// Preparation cache. One directory per content key; inside it, per center node:
//   <id>.ids   varint (LEB128) list: count, then sorted global node ids
//   <id>.P     16-byte header (magic "GCPEMB01", u32 N, u32 k) + N*k f64, row-major
//   <id>.C     same layout for the condition embedding

namespace graphcontrol {

inline constexpr std::array<char, 8> kEmbeddingMagic{'G', 'C', 'P', 'E', 'M', 'B', '0', '1'};

inline void write_embedding(std::ostream& out, const DenseMatrix& m) {
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  detail::write_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline DenseMatrix read_embedding(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kEmbeddingMagic) throw DataError("not an embedding cache file");
  const auto n = detail::read_u32(in, "N");
  const auto k = detail::read_u32(in, "k");
  DenseMatrix m(n, k);
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
    throw DataError("truncated embedding cache file");
  return m;
}

inline void write_varint_ids(std::ostream& out, const std::vector<NodeId>& ids) {
  auto put = [&](std::uint64_t v) {
    do {
      auto byte = static_cast<unsigned char>(v & 0x7f);
      v >>= 7;
      if (v) byte |= 0x80;
      out.put(static_cast<char>(byte));
    } while (v);
  };
  put(ids.size());
  for (auto id : ids) put(id);
}

inline std::vector<NodeId> read_varint_ids(std::istream& in) {
  auto get = [&]() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const int c = in.get();
      if (c == EOF) throw DataError("truncated id list");
      v |= static_cast<std::uint64_t>(c & 0x7f) << shift;
      if (!(c & 0x80)) return v;
    }
    throw DataError("malformed varint in id list");
  };
  std::vector<NodeId> ids(get());
  for (auto& id : ids) id = static_cast<NodeId>(get());
  return ids;
}

/// 64-bit FNV-1a, used for content keys.
class ContentHash {
 public:
  ContentHash& bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h_ = (h_ ^ c[i]) * 0x100000001b3ULL;
    return *this;
  }
  template <class T>
  ContentHash& value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    return bytes(&v, sizeof v);
  }
  ContentHash& text(const std::string& s) { return value(s.size()).bytes(s.data(), s.size()); }
  std::uint64_t digest() const { return h_; }
  std::string hex() const {
    std::ostringstream o;
    o << std::hex;
    o.width(16);
    o.fill('0');
    o << h_;
    return o.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fingerprint(const Graph& g) {
  ContentHash h;
  h.value(g.num_nodes());
  for (const auto& [u, v] : g.edge_list()) h.value(u).value(v);
  if (g.has_attributes()) {
    const auto& x = g.attributes();
    h.value(x.rows()).value(x.cols()).bytes(x.data(), static_cast<std::size_t>(x.size()) * sizeof(double));
  }
  return h.digest();
}

/// Cache root: GRAPHCONTROL_CACHE when set, else `fallback`.
inline std::filesystem::path cache_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("GRAPHCONTROL_CACHE"); env && *env) return env;
  return fallback;
}

/// Write-once, read-many file store under one content-addressed directory.
class PreparationCache {
 public:
  PreparationCache(const std::filesystem::path& root, const std::string& key) : dir_(root / key) {
    std::filesystem::create_directories(dir_);
  }
  const std::filesystem::path& directory() const { return dir_; }

  std::optional<std::vector<NodeId>> load_ids(NodeId center) const {
    std::ifstream in(path(center, ".ids"), std::ios::binary);
    if (!in) return std::nullopt;
    return read_varint_ids(in);
  }
  std::optional<DenseMatrix> load_embedding(NodeId center, const char* kind) const {
    std::ifstream in(path(center, kind), std::ios::binary);
    if (!in) return std::nullopt;
    return read_embedding(in);
  }
  void store_ids(NodeId center, const std::vector<NodeId>& ids) const {
    publish(center, ".ids", [&](std::ostream& o) { write_varint_ids(o, ids); });
  }
  void store_embedding(NodeId center, const char* kind, const DenseMatrix& m) const {
    publish(center, kind, [&](std::ostream& o) { write_embedding(o, m); });
  }

 private:
  std::filesystem::path path(NodeId center, const char* suffix) const { return dir_ / (std::to_string(center) + suffix); }

  template <class Fn>
  void publish(NodeId center, const char* suffix, Fn&& fn) const {
    const auto final_path = path(center, suffix);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw DataError("cannot write cache file " + tmp.string());
      fn(out);
    }
    std::filesystem::rename(tmp, final_path);
  }

  std::filesystem::path dir_;
};

}  // namespace graphcontrol
