#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "graphcontrol/dataset_io.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace graphcontrol;
using testutil::error_of;
using testutil::TempDir;
using testutil::write_file;

namespace {

void write_native(const TempDir& dir, const std::string& name, const std::string& edges, std::size_t n, int classes = 0,
                  const std::string& labels = "", const std::string& features = "") {
  const auto d = dir.path() / name;
  write_file(d / "meta.json", "{\"num_nodes\": " + std::to_string(n) + ", \"num_classes\": " + std::to_string(classes) +
                                  ", \"name\": \"" + name + "\"}");
  write_file(d / "edges.tsv", edges);
  if (!labels.empty()) write_file(d / "labels.csv", labels);
  if (!features.empty()) write_file(d / "features.csv", features);
}

Graph labeled_graph(std::size_t n, int classes, std::uint64_t seed) {
  Engine eng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(classes)));
  return oracle::random_graph(n, 0.1, seed).with_labels(y, classes);
}

}  // namespace

TEST(Graph, FromEdgesSymmetrizesAndDedupes) {
  const std::vector<Edge> e{{0, 1}, {1, 0}, {0, 1}, {2, 2}};
  const Graph g = Graph::from_edges(3, e);
  EXPECT_EQ(g.degrees(), (std::vector<std::size_t>{1, 1, 0}));
  EXPECT_EQ(g.num_edges(), 1u);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_FALSE(g.has_edge(2, 2));
  const Graph loops = Graph::from_edges(3, e, true);
  EXPECT_TRUE(loops.has_edge(2, 2));
  EXPECT_EQ(loops.degree(2), 1u);
  EXPECT_EQ(loops.num_edges(), 2u);
}

TEST(Graph, InvariantsOnRandomGraphs) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Graph g = oracle::random_graph(25, 0.2, s);
    const auto deg = g.degrees();
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      auto nb = g.neighbors(u);
      EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
      EXPECT_EQ(std::adjacent_find(nb.begin(), nb.end()), nb.end());
      EXPECT_EQ(deg[u], nb.size());
      for (auto v : nb) EXPECT_TRUE(g.has_edge(v, u));
    }
  }
}

TEST(Graph, OutOfRangeEdgeRejected) {
  const std::vector<Edge> e{{0, 5}};
  EXPECT_THROW(Graph::from_edges(3, e), DataError);
}

TEST(Graph, LabelAndAttributeValidation) {
  const std::vector<Edge> e{{0, 1}};
  const Graph g = Graph::from_edges(2, e);
  EXPECT_NE(error_of<DataError>([&] { (void)g.with_labels({0, 2}, 2); }).find("label out of range"), std::string::npos);
  EXPECT_THROW((void)g.with_labels({0}, 2), DataError);
  EXPECT_THROW((void)g.with_attributes(DenseMatrix::Zero(3, 2)), DataError);
  EXPECT_THROW((void)g.attributes(), DataError);
}

TEST(Graph, StructureViewHidesAttributes) {
  const Graph g = Graph::from_edges(2, std::vector<Edge>{{0, 1}}).with_attributes(DenseMatrix::Ones(2, 3));
  StructureView view(g);
  EXPECT_EQ(view.num_nodes(), 2u);
  EXPECT_TRUE(view.graph().has_edge(0, 1));
  EXPECT_FALSE(view.graph().has_attributes());
  EXPECT_THROW((void)view.graph().attributes(), DataError);
}

TEST(LoadDataset, SingleEdge) {
  TempDir dir;
  write_native(dir, "a", "0\t1\n", 2);
  const auto b = load_dataset(dir.path(), "a");
  EXPECT_EQ(b.graph.degrees(), (std::vector<std::size_t>{1, 1}));
  EXPECT_FALSE(b.is_attributed);
  EXPECT_EQ(b.name, "a");
}

TEST(LoadDataset, DirectedDuplicatesCollapse) {
  TempDir dir;
  write_native(dir, "a", "0\t1\n", 2);
  write_native(dir, "b", "0\t1\n1\t0\n", 2);
  EXPECT_EQ(load_dataset(dir.path(), "a").graph, load_dataset(dir.path(), "b").graph);
}

TEST(LoadDataset, LabelOutOfRangeNamesFileAndLine) {
  TempDir dir;
  write_native(dir, "a", "0\t1\n", 2, 2, "0\n2\n");
  const auto msg = error_of<DataError>([&] { load_dataset(dir.path(), "a"); });
  EXPECT_NE(msg.find("label out of range"), std::string::npos);
  EXPECT_NE(msg.find("labels.csv:2"), std::string::npos);
}

TEST(LoadDataset, ErrorsCarryLocation) {
  TempDir dir;
  write_native(dir, "malformed", "0\t1\n1 2\n", 3);
  EXPECT_NE(error_of<DataError>([&] { load_dataset(dir.path(), "malformed"); }).find("edges.tsv:2: malformed row"),
            std::string::npos);
  write_native(dir, "range", "0\t1\n\n1\t7\n", 3);
  const auto msg = error_of<DataError>([&] { load_dataset(dir.path(), "range"); });
  EXPECT_NE(msg.find("edges.tsv:3"), std::string::npos);
  EXPECT_NE(msg.find("node id out of range"), std::string::npos);
  write_native(dir, "rows", "0\t1\n", 3, 0, "", "1,2\n3,4\n");
  EXPECT_NE(error_of<DataError>([&] { load_dataset(dir.path(), "rows"); }).find("attribute row count mismatch"),
            std::string::npos);
  write_native(dir, "width", "0\t1\n", 2, 0, "", "1,2\n3\n");
  EXPECT_NE(error_of<DataError>([&] { load_dataset(dir.path(), "width"); }).find("features.csv:2"), std::string::npos);
  write_native(dir, "nlabels", "0\t1\n", 3, 2, "0\n1\n");
  EXPECT_NE(error_of<DataError>([&] { load_dataset(dir.path(), "nlabels"); }).find("label row count"), std::string::npos);
  EXPECT_NE(error_of<DataError>([&] { load_dataset(dir.path(), "absent"); }).find("missing file"), std::string::npos);
  std::filesystem::remove(dir.path() / "malformed" / "edges.tsv");
  EXPECT_NE(error_of<DataError>([&] { load_dataset(dir.path(), "malformed"); }).find("edges.tsv"), std::string::npos);
}

TEST(LoadDataset, RoundTripIsExact) {
  TempDir dir;
  SyntheticCitationOptions o;
  o.nodes = 60;
  o.vocabulary = 20;
  auto b = synthetic_citation(o);
  DenseMatrix x = b.graph.attributes();
  Engine eng(9);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = uniform01(eng) * 1e-3 - 0.3333333333333333;
  b.graph = b.graph.with_attributes(x);
  save_dataset(b, dir / "rt");
  const auto back = load_dataset(dir.path(), "rt");
  EXPECT_EQ(back.graph, b.graph);
  EXPECT_TRUE(back.is_attributed);
  EXPECT_EQ(back.name, b.name);
  back.validate();
}

TEST(Convert, RemapsTokensLabelsAndFeatures) {
  TempDir dir;
  write_file(dir / "e.txt", "# comment\n10 20 1.0\n20,30\n30\t10\n% other comment\n10 20\n");
  write_file(dir / "y.txt", "node label\n10 b\n20 a\n30 b\n");
  write_file(dir / "x.txt", "30 1 2\n10 3 4\n20 5 6\n99 0 0\n");
  ConvertOptions o{dir / "e.txt", dir / "y.txt", dir / "x.txt", "tri"};
  const auto b = convert_edge_list(o);
  ASSERT_EQ(b.graph.num_nodes(), 3u);
  EXPECT_EQ(b.graph.num_edges(), 3u);
  EXPECT_EQ(std::vector<int>(b.graph.labels().begin(), b.graph.labels().end()), (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(b.graph.num_classes(), 2);
  EXPECT_DOUBLE_EQ(b.graph.attributes()(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(b.graph.attributes()(2, 1), 2.0);
  EXPECT_TRUE(b.is_attributed);

  write_file(dir / "bad.txt", "1\n");
  EXPECT_NE(error_of<DataError>([&] { convert_edge_list({dir / "bad.txt", {}, {}, "x"}); }).find("bad.txt:1"),
            std::string::npos);
}

TEST(Split, TenNodesOneTenth) {
  const auto g = labeled_graph(10, 2, 1);
  const auto s = make_split(g, 0.1, 3);
  EXPECT_EQ(s.train_ids.size(), 1u);
  EXPECT_EQ(s.test_ids.size(), 9u);
}

TEST(Split, DeterministicGivenSeed) {
  const auto g = labeled_graph(50, 3, 2);
  const auto a = make_split(g, 0.3, 11), b = make_split(g, 0.3, 11);
  EXPECT_EQ(a.train_ids, b.train_ids);
  EXPECT_EQ(a.test_ids, b.test_ids);
  EXPECT_NE(make_split(g, 0.3, 12).train_ids, a.train_ids);
}

TEST(Split, PartitionProperty) {
  const auto g = labeled_graph(40, 3, 4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = make_split(g, 0.1, seed);
    std::set<NodeId> all(s.train_ids.begin(), s.train_ids.end());
    EXPECT_EQ(all.size(), s.train_ids.size());
    for (auto v : s.test_ids) EXPECT_TRUE(all.insert(v).second);
    EXPECT_EQ(all.size(), 40u);
    EXPECT_EQ(s.train_ids.size(), 4u);
  }
}

TEST(Split, DegenerateFractionsRejected) {
  const auto g = labeled_graph(10, 2, 1);
  EXPECT_THROW(make_split(g, 0.01, 0), ConfigError);
  EXPECT_THROW(make_split(g, 0.99, 0), ConfigError);
  EXPECT_THROW(make_split(g, 0.0, 0), ConfigError);
  EXPECT_THROW(make_split(oracle::random_graph(10, 0.3, 0), 0.5, 0), DataError);
}

TEST(FewShot, ShotsPerClass) {
  const Graph g = stochastic_block_graph({100, 100, 100, 100}, 0.05, 0.01, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = make_fewshot_split(g, 3, seed);
    EXPECT_EQ(s.train_ids.size(), 12u);
    std::vector<int> count(4, 0);
    for (auto v : s.train_ids) ++count[static_cast<std::size_t>(g.labels()[v])];
    EXPECT_EQ(count, (std::vector<int>{3, 3, 3, 3}));
    const auto pool = make_split(g, 0.1, seed);
    EXPECT_EQ(s.test_ids, pool.test_ids);
    for (auto v : s.train_ids) EXPECT_TRUE(std::binary_search(pool.train_ids.begin(), pool.train_ids.end(), v));
  }
  EXPECT_EQ(make_fewshot_split(g, 3, 5).train_ids, make_fewshot_split(g, 3, 5).train_ids);
}

TEST(FewShot, TooManyShotsNamesClass) {
  const Graph g = stochastic_block_graph({100, 100, 10}, 0.05, 0.01, 3);
  const auto msg = error_of<DataError>([&] { make_fewshot_split(g, 8, 0); });
  EXPECT_NE(msg.find("class "), std::string::npos);
  EXPECT_NE(msg.find("shots=8"), std::string::npos);
}
