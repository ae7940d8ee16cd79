#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"

// Native dataset directory layout:
//   edges.tsv     u<TAB>v per line, 0-based ids
//   features.csv  optional, N rows of d comma-separated values
//   labels.csv    optional, N rows of one integer
//   meta.json     {"num_nodes": N, "num_classes": C, "name": "..."}

namespace graphcontrol {

namespace detail {

inline std::string where(const std::filesystem::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view delims) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && delims.find(line[i]) != std::string_view::npos) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && delims.find(line[j]) == std::string_view::npos) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("missing file: " + file.string());
  return in;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads <root>/<name>/ in the native layout.
inline DatasetBundle load_dataset(const std::filesystem::path& root, const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = root / name;
  const fs::path meta_path = dir / "meta.json";

  nlohmann::json meta;
  {
    auto in = detail::open_input(meta_path);
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed meta.json: " + std::string(e.what()));
    }
  }
  if (!meta.contains("num_nodes") || !meta["num_nodes"].is_number_unsigned())
    throw DataError("meta.json: missing or invalid num_nodes");
  const auto n = meta["num_nodes"].get<std::size_t>();
  const int num_classes = meta.value("num_classes", 0);

  std::vector<Edge> edges;
  {
    const fs::path file = dir / "edges.tsv";
    auto in = detail::open_input(file);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto fields = detail::split_fields(body, "\t");
      if (fields.size() != 2) throw DataError(detail::where(file, lineno) + ": malformed row, expected u<TAB>v");
      const auto u = detail::parse_number<std::uint64_t>(fields[0]);
      const auto v = detail::parse_number<std::uint64_t>(fields[1]);
      if (!u || !v) throw DataError(detail::where(file, lineno) + ": malformed row, non-integer node id");
      if (*u >= n || *v >= n)
        throw DataError(detail::where(file, lineno) + ": node id out of range (num_nodes=" + std::to_string(n) + ")");
      edges.emplace_back(static_cast<NodeId>(*u), static_cast<NodeId>(*v));
    }
  }
  Graph graph = Graph::from_edges(n, edges);

  if (const fs::path file = dir / "labels.csv"; fs::exists(file)) {
    auto in = detail::open_input(file);
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto y = detail::parse_number<int>(body);
      if (!y) throw DataError(detail::where(file, lineno) + ": malformed row, expected one integer");
      if (*y < 0 || *y >= num_classes)
        throw DataError(detail::where(file, lineno) + ": label out of range (" + std::to_string(*y) + " with " +
                        std::to_string(num_classes) + " classes)");
      labels.push_back(*y);
    }
    if (labels.size() != n)
      throw DataError(detail::where(file, lineno) + ": label row count " + std::to_string(labels.size()) +
                      " does not match num_nodes=" + std::to_string(n));
    graph = graph.with_labels(std::move(labels), num_classes);
  }

  if (const fs::path file = dir / "features.csv"; fs::exists(file)) {
    auto in = detail::open_input(file);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      std::vector<double> row;
      for (auto field : detail::split_fields(body, ",")) {
        const auto x = detail::parse_number<double>(field);
        if (!x) throw DataError(detail::where(file, lineno) + ": malformed row, non-numeric value");
        row.push_back(*x);
      }
      if (!rows.empty() && row.size() != rows.front().size())
        throw DataError(detail::where(file, lineno) + ": malformed row, expected " +
                        std::to_string(rows.front().size()) + " values");
      rows.push_back(std::move(row));
    }
    if (rows.size() != n)
      throw DataError(detail::where(file, lineno) + ": attribute row count mismatch (" + std::to_string(rows.size()) +
                      " rows for num_nodes=" + std::to_string(n) + ")");
    DenseMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n ? rows.front().size() : 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    graph = graph.with_attributes(std::move(x));
  }

  DatasetBundle bundle{std::move(graph), meta.value("name", name), false};
  bundle.is_attributed = bundle.graph.has_attributes();
  return bundle;
}

/// Writes `bundle` into `dir` in the native layout. Values are printed in
/// shortest round-trip form, so a reload reproduces the graph exactly.
inline void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Graph& g = bundle.graph;
  {
    std::ofstream out(dir / "edges.tsv");
    for (auto [u, v] : g.edge_list()) out << u << '\t' << v << '\n';
  }
  if (g.has_labels()) {
    std::ofstream out(dir / "labels.csv");
    for (int y : g.labels()) out << y << '\n';
  }
  if (g.has_attributes()) {
    std::ofstream out(dir / "features.csv");
    const auto& x = g.attributes();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j) out << ',';
        out << detail::format_double(x(i, j));
      }
      out << '\n';
    }
  }
  nlohmann::json meta = {{"num_nodes", g.num_nodes()}, {"num_classes", g.num_classes()}, {"name", bundle.name}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

struct ConvertOptions {
  std::filesystem::path edges;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> features;
  std::string name;
};

/// Ingests a generic edge-list export: whitespace/comma/tab separated
/// `u v [weight...]` rows with '#' or '%' comments and arbitrary node tokens.
/// Optional label file rows are `node label` (a non-numeric header row is
/// skipped); optional feature file rows are `node f1 f2 ...`. Node tokens are
/// remapped to 0..N-1 in sorted order (numeric when every token is an
/// integer) and label values to 0..C-1.
inline DatasetBundle convert_edge_list(const ConvertOptions& opts) {
  constexpr std::string_view delims = " \t,;";
  std::vector<std::pair<std::string, std::string>> raw_edges;
  std::vector<std::pair<std::string, std::string>> raw_labels;
  std::vector<std::pair<std::string, std::vector<double>>> raw_features;

  auto for_each_row = [&](const std::filesystem::path& file, auto&& fn) {
    auto in = detail::open_input(file);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      const auto body = detail::trim(line);
      if (body.empty() || body.front() == '#' || body.front() == '%') continue;
      fn(detail::split_fields(body, delims), lineno);
    }
  };

  for_each_row(opts.edges, [&](const std::vector<std::string_view>& f, std::size_t lineno) {
    if (f.size() < 2) throw DataError(detail::where(opts.edges, lineno) + ": malformed row, expected two node ids");
    raw_edges.emplace_back(std::string(f[0]), std::string(f[1]));
  });
  if (opts.labels) {
    bool first = true;
    for_each_row(*opts.labels, [&](const std::vector<std::string_view>& f, std::size_t lineno) {
      if (f.size() < 2) throw DataError(detail::where(*opts.labels, lineno) + ": malformed row, expected `node label`");
      const bool header = first && !detail::parse_number<long long>(f[1]);
      first = false;
      if (!header) raw_labels.emplace_back(std::string(f[0]), std::string(f[1]));
    });
  }
  if (opts.features) {
    for_each_row(*opts.features, [&](const std::vector<std::string_view>& f, std::size_t lineno) {
      std::vector<double> row;
      for (std::size_t j = 1; j < f.size(); ++j) {
        auto x = detail::parse_number<double>(f[j]);
        if (!x) throw DataError(detail::where(*opts.features, lineno) + ": malformed row, non-numeric value");
        row.push_back(*x);
      }
      raw_features.emplace_back(std::string(f[0]), std::move(row));
    });
  }

  std::vector<std::string> tokens;
  for (auto& [u, v] : raw_edges) {
    tokens.push_back(u);
    tokens.push_back(v);
  }
  for (auto& [u, y] : raw_labels) tokens.push_back(u);
  const bool numeric = std::all_of(tokens.begin(), tokens.end(),
                                   [](const std::string& t) { return detail::parse_number<long long>(t).has_value(); });
  auto token_less = [numeric](const std::string& a, const std::string& b) {
    if (numeric) return *detail::parse_number<long long>(a) < *detail::parse_number<long long>(b);
    return a < b;
  };
  std::sort(tokens.begin(), tokens.end(), token_less);
  tokens.erase(std::unique(tokens.begin(), tokens.end(),
                           [&](const std::string& a, const std::string& b) { return !token_less(a, b) && !token_less(b, a); }),
               tokens.end());
  auto id_of = [&](const std::string& t) -> std::optional<NodeId> {
    auto it = std::lower_bound(tokens.begin(), tokens.end(), t, token_less);
    if (it == tokens.end() || token_less(t, *it)) return std::nullopt;
    return static_cast<NodeId>(it - tokens.begin());
  };

  std::vector<Edge> edges;
  for (auto& [u, v] : raw_edges) edges.emplace_back(*id_of(u), *id_of(v));
  Graph graph = Graph::from_edges(tokens.size(), edges);

  if (opts.labels) {
    std::vector<std::string> classes;
    for (auto& [u, y] : raw_labels) classes.push_back(y);
    const bool numeric_labels = std::all_of(classes.begin(), classes.end(),
                                            [](const std::string& t) { return detail::parse_number<long long>(t).has_value(); });
    auto label_less = [numeric_labels](const std::string& a, const std::string& b) {
      if (numeric_labels) return *detail::parse_number<long long>(a) < *detail::parse_number<long long>(b);
      return a < b;
    };
    std::sort(classes.begin(), classes.end(), label_less);
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::vector<int> labels(tokens.size(), -1);
    for (auto& [u, y] : raw_labels) {
      const auto id = id_of(u);
      labels[*id] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), y, label_less) - classes.begin());
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0) throw DataError("node '" + tokens[i] + "' has no label in " + opts.labels->string());
    graph = graph.with_labels(std::move(labels), static_cast<int>(classes.size()));
  }

  if (opts.features) {
    if (raw_features.empty()) throw DataError("feature file is empty: " + opts.features->string());
    const auto d = raw_features.front().second.size();
    DenseMatrix x = DenseMatrix::Zero(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(d));
    std::vector<bool> seen(tokens.size(), false);
    for (auto& [u, row] : raw_features) {
      const auto id = id_of(u);
      if (!id) continue;  // features for nodes absent from the graph
      if (row.size() != d) throw DataError("feature rows have inconsistent width in " + opts.features->string());
      for (std::size_t j = 0; j < d; ++j) x(*id, static_cast<Eigen::Index>(j)) = row[j];
      seen[*id] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw DataError("node '" + tokens[i] + "' has no feature row in " + opts.features->string());
    graph = graph.with_attributes(std::move(x));
  }

  DatasetBundle bundle{std::move(graph), opts.name, false};
  bundle.is_attributed = bundle.graph.has_attributes();
  return bundle;
}

}  // namespace graphcontrol
