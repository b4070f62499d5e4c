#include <cdrscore/call_graph.hpp>
#include <cdrscore/random.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

using namespace cdrscore;

namespace {

CdrRecord call(const std::string& a, const std::string& b, int day = 1, std::int64_t dur = 60) {
  return {*calendar::make_date(2017, 5, day), TimeOfDay{36000}, dur, a, b};
}

const DateRange kMay{*calendar::make_date(2017, 5, 1), *calendar::make_date(2017, 5, 31)};

NodeId id(const CallGraph& g, const std::string& s) { return *g.index().find(s); }

std::vector<std::pair<std::string, double>> named(const CallGraph& g, const std::string& v) {
  std::vector<std::pair<std::string, double>> out;
  auto nb = g.neighbors(id(g, v));
  for (std::size_t k = 0; k < nb.size(); ++k) out.emplace_back(g.index().id_of(nb.ids[k]), nb.weights[k]);
  return out;
}

CallGraph from_pairs(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& e, GraphMode mode) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(100 + i));
  std::vector<WeightedEdge> calls;
  for (auto [a, b] : e) calls.push_back({a, b, 1.0});
  return CallGraph::from_edges(NodeIndex(ids), calls, mode);
}

using Named = std::vector<std::pair<std::string, double>>;

}  // namespace

TEST(BuildGraph, UndirectedSumsBothDirections) {
  std::vector<CdrRecord> recs = {call("A", "B"), call("A", "B"), call("B", "A")};
  auto g = build_graph(recs, kMay, GraphMode::undirected);
  EXPECT_EQ(g.n_edges(), 1u);
  EXPECT_EQ(named(g, "A"), (Named{{"B", 3.0}}));
  EXPECT_EQ(named(g, "B"), (Named{{"A", 3.0}}));
}

TEST(BuildGraph, OutgoingKeepsDirection) {
  std::vector<CdrRecord> recs = {call("A", "B"), call("A", "B"), call("B", "A")};
  auto g = build_graph(recs, kMay, GraphMode::outgoing);
  EXPECT_EQ(g.n_edges(), 2u);
  EXPECT_EQ(named(g, "A"), (Named{{"B", 2.0}}));
  EXPECT_EQ(named(g, "B"), (Named{{"A", 1.0}}));
}

TEST(BuildGraph, IncomingListsCallers) {
  std::vector<CdrRecord> recs = {call("A", "B")};
  auto g = build_graph(recs, kMay, GraphMode::incoming);
  EXPECT_EQ(named(g, "B"), (Named{{"A", 1.0}}));
  EXPECT_TRUE(g.neighbors(id(g, "A")).empty());
}

TEST(BuildGraph, WindowAndDurationWeighting) {
  std::vector<CdrRecord> recs = {call("A", "B", 2, 30), call("A", "B", 3, 70),
                                 {*calendar::make_date(2017, 6, 1), TimeOfDay{0}, 10, "A", "C"}};
  auto g = build_graph(recs, kMay, GraphMode::outgoing, EdgeWeighting::total_duration);
  EXPECT_EQ(g.records_outside_window, 1u);
  EXPECT_EQ(g.n_nodes(), 2u);
  EXPECT_EQ(named(g, "A"), (Named{{"B", 100.0}}));
}

TEST(BuildGraph, EmptyRecordSet) {
  auto g = build_graph(std::span<const CdrRecord>{}, kMay, GraphMode::undirected);
  EXPECT_EQ(g.n_nodes(), 0u);
  EXPECT_TRUE(degree_distribution(g).empty());
}

TEST(Neighbors, StarIsolatedPath) {
  auto star = from_pairs(5, {{0, 1}, {0, 2}, {0, 3}}, GraphMode::undirected);
  EXPECT_EQ(star.neighbors(0).size(), 3u);
  EXPECT_TRUE(star.neighbors(4).empty());
  auto path = from_pairs(3, {{0, 1}, {1, 2}}, GraphMode::undirected);
  auto nb = path.neighbors(1);
  EXPECT_EQ(std::vector<NodeId>(nb.ids.begin(), nb.ids.end()), (std::vector<NodeId>{0, 2}));
}

TEST(DegreeDistribution, SmallShapes) {
  auto tri = from_pairs(3, {{0, 1}, {1, 2}, {2, 0}}, GraphMode::undirected);
  EXPECT_EQ(degree_distribution(tri), (std::map<std::size_t, std::size_t>{{2, 3}}));
  auto star = from_pairs(5, {{0, 1}, {0, 2}, {0, 3}, {4, 0}}, GraphMode::undirected);
  EXPECT_EQ(degree_distribution(star), (std::map<std::size_t, std::size_t>{{1, 4}, {4, 1}}));
}

TEST(CallGraph, SelfLoopRejected) {
  EXPECT_THROW(from_pairs(2, {{1, 1}}, GraphMode::outgoing), DataError);
}

namespace {

std::vector<CdrRecord> random_calls(std::uint64_t seed, int n_calls, int n_ids) {
  auto rng = make_engine(seed, "graph-test");
  std::uniform_int_distribution<int> pick(0, n_ids - 1), day(1, 31);
  std::vector<CdrRecord> recs;
  while (static_cast<int>(recs.size()) < n_calls) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    recs.push_back(call("p" + std::to_string(a), "p" + std::to_string(b), day(rng)));
  }
  return recs;
}

}  // namespace

TEST(CallGraphProperty, WeightConservationAndModeDuality) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto recs = random_calls(seed, 400, 40);
    auto out = build_graph(recs, kMay, GraphMode::outgoing);
    auto in = build_graph(recs, kMay, GraphMode::incoming);
    auto ud = build_graph(recs, kMay, GraphMode::undirected);
    EXPECT_DOUBLE_EQ(out.total_weight(), 400.0);
    EXPECT_DOUBLE_EQ(in.total_weight(), 400.0);
    EXPECT_DOUBLE_EQ(ud.total_weight(), 400.0);
    // both directed modes describe the same calls, listed in call direction
    auto by_pair = [](auto& a, auto& b) { return std::pair(a.src, a.dst) < std::pair(b.src, b.dst); };
    auto a = out.edge_list(), b = in.edge_list();
    std::sort(b.begin(), b.end(), by_pair);
    EXPECT_EQ(a, b);
    for (NodeId v = 0; v < out.n_nodes(); ++v)
      for (NodeId u : out.neighbors(v).ids) {
        auto nb = in.neighbors(u);
        EXPECT_TRUE(std::find(nb.ids.begin(), nb.ids.end(), v) != nb.ids.end());
      }
    // undirected weight is the sum of both directions
    for (NodeId v = 0; v < ud.n_nodes(); ++v)
      EXPECT_DOUBLE_EQ(ud.weighted_degree(v), out.weighted_degree(v) + in.weighted_degree(v));
  }
}

TEST(CallGraphProperty, RecordOrderDoesNotMatter) {
  auto recs = random_calls(3, 300, 30);
  auto g1 = build_graph(recs, kMay, GraphMode::undirected);
  auto rng = make_engine(9, "shuffle");
  std::shuffle(recs.begin(), recs.end(), rng);
  auto g2 = build_graph(recs, kMay, GraphMode::undirected);
  EXPECT_EQ(g1.index().ids(), g2.index().ids());
  EXPECT_EQ(g1.edge_list(), g2.edge_list());
}

TEST(CallGraph, EdgeListRoundTrip) {
  auto g = build_graph(random_calls(5, 100, 12), kMay, GraphMode::outgoing);
  std::stringstream edges, nodes;
  write_edge_list(edges, g);
  write_node_index(nodes, g.index());
  auto back = read_graph(edges, nodes, GraphMode::outgoing);
  EXPECT_EQ(back.edge_list(), g.edge_list());
  EXPECT_EQ(back.index().ids(), g.index().ids());
}
