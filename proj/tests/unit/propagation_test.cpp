#include <cdrscore/propagation.hpp>
#include <cdrscore/random.hpp>
#include <gtest/gtest.h>

#include <numeric>

using namespace cdrscore;

namespace {

CallGraph graph(std::size_t n, const std::vector<WeightedEdge>& e, GraphMode mode = GraphMode::undirected) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(1000 + i));
  return CallGraph::from_edges(NodeIndex(ids), e, mode);
}

CallGraph random_graph(std::uint64_t seed, std::size_t n, int m) {
  auto rng = make_engine(seed, "prop-test");
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  std::vector<WeightedEdge> e;
  while (static_cast<int>(e.size()) < m) {
    NodeId a = pick(rng), b = pick(rng);
    if (a != b) e.push_back({a, b, 1.0 + static_cast<double>(rng() % 5)});
  }
  return graph(n, e);
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(PageRank, TwoNodeLinearSystem) {
  auto g = graph(2, {{0, 1, 1.0}});
  std::vector<double> z = {1.0, 0.0};
  PropagationConfig cfg;
  cfg.tolerance = 1e-12;
  cfg.max_iterations = 1000;
  auto x = personalized_pagerank(g, z, cfg);
  const double a = 0.15 / (1 - 0.85 * 0.85);
  EXPECT_NEAR(x.scores[0], a, 1e-10);
  EXPECT_NEAR(x.scores[1], 0.85 * a, 1e-10);
  EXPECT_NEAR(x.scores[0], 0.5405, 5e-5);
  EXPECT_NEAR(x.scores[1], 0.4595, 5e-5);
}

TEST(PageRank, UniformRestartOnRing) {
  const std::size_t n = 9;
  std::vector<WeightedEdge> e;
  for (NodeId i = 0; i < n; ++i) e.push_back({i, static_cast<NodeId>((i + 1) % n), 2.0});
  auto g = graph(n, e);
  std::vector<double> z(n, 1.0 / n);
  auto x = personalized_pagerank(g, z);
  for (double s : x.scores) EXPECT_NEAR(s, 1.0 / n, 1e-12);
}

TEST(PageRank, ScoresSumToOneAndStayLocal) {
  // two components; restart only in the first
  auto g = graph(6, {{0, 1, 1}, {1, 2, 1}, {3, 4, 1}, {4, 5, 1}});
  std::vector<double> z = {1, 0, 0, 0, 0, 0};
  PropagationConfig cfg;
  cfg.tolerance = 1e-12;
  cfg.max_iterations = 1000;
  auto x = personalized_pagerank(g, z, cfg);
  EXPECT_NEAR(sum(x.scores), 1.0, 1e-12);
  EXPECT_GT(x.scores[0], x.scores[2]);
  EXPECT_GT(x.scores[1], x.scores[2]);
  for (int v = 3; v < 6; ++v) EXPECT_EQ(x.scores[v], 0.0);
}

TEST(PageRank, ConvergedVectorIsFixedPoint) {
  auto g = random_graph(4, 50, 150);
  std::vector<double> z(50, 0.0);
  z[3] = 0.5;
  z[17] = 0.5;
  PropagationConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_iterations = 2000;
  auto x = personalized_pagerank(g, z, cfg);
  const std::vector<double>& restart = z;
  // one more step from the fixed point must not move it
  TransitionMatrix W(g);
  double dangling = 0;
  for (NodeId j = 0; j < 50; ++j)
    if (W.dangling(j)) dangling += x.scores[j];
  for (NodeId i = 0; i < 50; ++i) {
    const double step = 0.85 * W.gather(i, x.scores) + (0.85 * dangling + 0.15) * restart[i];
    EXPECT_NEAR(step, x.scores[i], 1e-11);
  }
}

TEST(PageRank, NonConvergenceReported) {
  auto g = random_graph(2, 40, 100);
  std::vector<double> z(40, 0.0);
  z[0] = 1;
  PropagationConfig cfg;
  cfg.tolerance = 1e-15;
  cfg.max_iterations = 2;
  EXPECT_THROW(personalized_pagerank(g, z, cfg), ConvergenceError);
}

TEST(SpreadingActivation, IsolatedSeedKeepsEnergy) {
  auto g = graph(3, {{1, 2, 1.0}});
  std::vector<double> e = {1, 0, 0};
  auto x = spreading_activation(g, e);
  EXPECT_EQ(x.scores, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(x.iterations_run, 1);
}

TEST(SpreadingActivation, OneStepTransfer) {
  auto g = graph(2, {{0, 1, 1.0}});
  std::vector<double> e = {1, 0};
  PropagationConfig cfg;
  cfg.max_iterations = 1;
  auto x = spreading_activation(g, e, cfg);
  EXPECT_NEAR(x.scores[0], 0.15, 1e-15);
  EXPECT_NEAR(x.scores[1], 0.85, 1e-15);
}

TEST(SpreadingActivation, EnergyConservedEveryIteration) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = random_graph(seed, 60, 120);
    std::vector<double> e(60, 0.0);
    e[seed % 60] = 2.0;
    e[(seed * 7) % 60] += 1.0;
    const double total = sum(e);
    PropagationConfig cfg;
    cfg.d = 0.5 + 0.02 * static_cast<double>(seed);
    int seen = 0;
    spreading_activation(g, e, cfg, [&](int, std::span<const double> energy) {
      ++seen;
      EXPECT_NEAR(std::accumulate(energy.begin(), energy.end(), 0.0), total, 1e-9);
    });
    EXPECT_GT(seen, 0);
  }
}

TEST(SpreadingActivation, EmptySeedRejected) {
  auto g = graph(2, {{0, 1, 1.0}});
  std::vector<double> e = {0, 0};
  EXPECT_THROW(spreading_activation(g, e), DataError);
}

TEST(Propagation, ParallelMatchesSerial) {
  auto g = random_graph(11, 3000, 9000);
  std::vector<double> z(3000, 0.0), e(3000, 0.0);
  for (int i = 0; i < 3000; i += 37) z[i] = e[i] = 1.0;
  for (double& v : z) v /= 82.0;
  PropagationConfig serial, par;
  par.parallel = true;
  auto a = personalized_pagerank(g, z, serial), b = personalized_pagerank(g, z, par);
  auto c = spreading_activation(g, e, serial), d = spreading_activation(g, e, par);
  for (std::size_t i = 0; i < 3000; ++i) {
    EXPECT_NEAR(a.scores[i], b.scores[i], 1e-12);
    EXPECT_NEAR(c.scores[i], d.scores[i], 1e-12);
  }
}

TEST(Seeds, CriterionSelectsLevels) {
  NodeLabelSet labels = NodeLabelSet::unlabeled(5);
  labels.delinquency = {-1, 0, 1, 2, 3};
  auto z = restart_vector(labels, SeedCriterion::ge2);
  EXPECT_EQ(z, (std::vector<double>{0, 0, 0, 0.5, 0.5}));
  EXPECT_EQ(seed_energy(labels, SeedCriterion::ge1, SeedEnergy::severity), (std::vector<double>{0, 0, 1, 2, 3}));
  labels.delinquency = {-1, 0, 0, 0, 0};
  EXPECT_THROW(restart_vector(labels, SeedCriterion::ge1), DataError);
}

TEST(ExposureCutoff, MinimumOverThreeArrears) {
  NodeLabelSet labels = NodeLabelSet::unlabeled(3);
  labels.delinquency = {3, 3, 0};
  ExposureVector x;
  x.scores = {0.9, 0.4, 0.1};
  EXPECT_DOUBLE_EQ(exposure_cutoff(x, labels), 0.4);
  labels.delinquency = {0, 3, 0};
  EXPECT_DOUBLE_EQ(exposure_cutoff(x, labels), 0.4);
  labels.delinquency = {2, 1, 0};
  EXPECT_THROW(exposure_cutoff(x, labels), DataError);
}

TEST(Relabel, CutoffBoundaries) {
  ExposureVector x;
  x.scores = {0.6, 0.3};
  auto r = relabel_high_risk(x, 0.5);
  EXPECT_EQ(r.high_risk, (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(relabel_high_risk(x, 0.3).n_high, 2u);
  EXPECT_EQ(relabel_high_risk(x, 0.61).n_high, 0u);
}
