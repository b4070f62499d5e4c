#include <cdrscore/pipeline.hpp>
#include <cdrscore/synth.hpp>
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace cdrscore;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "cdrscore_pipeline_test";
    fs::remove_all(root_);
    SynthConfig c;
    c.seed = 3;
    c.n_nodes = 8000;
    c.n_subjects = 3000;
    c.n_calls = 60000;
    c.n_prior_cards = 800;
    c.default_rate = 0.1;
    write_dataset(generate_world(c), root_ / "data");
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static ExperimentConfig config(const std::string& out) {
    ExperimentConfig e;
    const SynthPaths p(root_ / "data");
    e.cdr = p.cdr;
    e.accounts = p.accounts;
    e.transactions = p.transactions;
    e.cards = p.cards;
    e.out_dir = root_ / out;
    e.models = {"A", "B", "H"};
    e.train.forest.n_trees = 40;
    e.roi_grid = {0.05};
    return e;
  }

  static fs::path root_;
};

fs::path PipelineTest::root_;

}  // namespace

TEST(ModelGroups, Mapping) {
  using G = FeatureGroup;
  EXPECT_EQ(model_groups("A"), std::vector<G>{G::SD});
  EXPECT_EQ(model_groups("E"), std::vector<G>{G::SPA});
  EXPECT_EQ(model_groups("F"), (std::vector<G>{G::SD, G::CB}));
  EXPECT_EQ(model_groups("G"), (std::vector<G>{G::CB, G::LB, G::PR, G::SPA}));
  EXPECT_EQ(model_groups("H"), (std::vector<G>{G::SD, G::CB, G::LB, G::PR, G::SPA}));
  EXPECT_THROW(model_groups("Z"), UsageError);
}

TEST_F(PipelineTest, ReportHasOneRowPerModel) {
  auto res = run_pipeline(config("run"));
  const auto& models = res.report["models"];
  ASSERT_EQ(models.size(), 3u);
  for (const auto& m : models) {
    EXPECT_GT(m["auc"].get<double>(), 0.0);
    EXPECT_GT(m["features"].get<std::size_t>(), 0u);
    EXPECT_TRUE(m.contains("emp"));
    EXPECT_TRUE(m.contains("model_profit"));
  }
  EXPECT_EQ(res.report["delong"].size(), 3u);
  EXPECT_EQ(res.report["sweeps"]["roi"].size(), 1u);
  for (const char* f : {"models.csv", "delong.csv", "report.json", "report.txt", "features.csv", "sweep_roi.csv",
                        "importance_profit.csv", "importance_accuracy.csv", "model_H.json"})
    EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
  // each cohort reports its netstats
  for (const auto& c : res.report["data"]["cohorts"]) EXPECT_TRUE(c["netstats"].contains("dyadicity"));
}

TEST_F(PipelineTest, ResumedRunMatchesFreshRun) {
  auto cfg = config("resume");
  run_pipeline(cfg);
  const auto first = slurp(cfg.out_dir / "report.json");
  const auto models = slurp(cfg.out_dir / "models.csv");
  fs::remove(cfg.out_dir / "report.json");
  bool reused = false;
  cfg.log = [&](const std::string& s) { reused = reused || s.rfind("reusing", 0) == 0; };
  run_pipeline(cfg);
  EXPECT_TRUE(reused);
  EXPECT_EQ(slurp(cfg.out_dir / "report.json"), first);
  EXPECT_EQ(slurp(cfg.out_dir / "models.csv"), models);
}

TEST_F(PipelineTest, RoiSweepNonIncreasing) {
  auto cfg = config("sweep");
  cfg.models = {"H"};
  cfg.importance = false;
  cfg.roi_grid = {0.01, 0.03, 0.05, 0.1, 0.2};
  auto res = run_pipeline(cfg);
  const auto& rows = res.report["sweeps"]["roi"];
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t k = 1; k < rows.size(); ++k)
    EXPECT_LE(rows[k]["emp"].get<double>(), rows[k - 1]["emp"].get<double>() + 1e-15);
}

TEST_F(PipelineTest, MissingInputNamesThePath) {
  auto cfg = config("missing");
  cfg.cards = root_ / "nowhere" / "cards.csv";
  try {
    run_pipeline(cfg);
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere/cards.csv"), std::string::npos);
  }
}
