#include <cdrscore/netstats.hpp>
#include <cdrscore/pipeline.hpp>
#include <cdrscore/synth.hpp>
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace cdrscore;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.n_nodes = 8000;
  c.n_subjects = 3000;
  c.n_calls = 60000;
  c.n_prior_cards = 800;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

double subject_default_rate(const SynthWorld& w) {
  std::size_t subjects = 0, defaults = 0;
  for (std::size_t k = 0; k < w.cards.size(); ++k)
    if (w.role[w.card_node[k]] == NodeRole::subject) {
      ++subjects;
      defaults += w.cards[k].is_default();
    }
  return double(defaults) / double(subjects);
}

DefaultLabels risky_labels(const SynthNetwork& net) {
  DefaultLabels l(net.risky.size());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = net.risky[i] == 1;
  return l;
}

CallGraph network_graph(const SynthNetwork& net) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < net.risky.size(); ++i) ids.push_back(synth_phone_id(i));
  return CallGraph::from_edges(NodeIndex(ids), net.edges, GraphMode::undirected);
}

}  // namespace

TEST(Synth, SameSeedSameFiles) {
  const auto dir = fs::temp_directory_path() / "cdrscore_synth_det";
  fs::remove_all(dir);
  write_dataset(generate_world(small(5)), dir / "a");
  write_dataset(generate_world(small(5)), dir / "b");
  for (const char* f : {"cdr.csv", "accounts.csv", "transactions.csv", "cards.csv", "truth.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  fs::remove_all(dir);
}

TEST(Synth, OutputsIngestCleanly) {
  const auto dir = fs::temp_directory_path() / "cdrscore_synth_ingest";
  fs::remove_all(dir);
  auto w = generate_world(small(6));
  write_dataset(w, dir);
  const SynthPaths p(dir);
  auto cdr = ingest_cdr_file(p.cdr.string());
  EXPECT_EQ(cdr.stats.rows_rejected, 0u);
  EXPECT_EQ(cdr.stats.rows_read, w.calls.size());
  auto bank = ingest_bank_files(p.accounts.string(), p.transactions.string(), p.cards.string());
  EXPECT_EQ(bank.records.size(), w.cards.size());
  EXPECT_EQ(bank.stats.orphan_transactions + bank.stats.orphan_cards, 0u);
  fs::remove_all(dir);
}

TEST(Synth, DefaultRateCalibrated) {
  SynthConfig c;
  c.n_nodes = 60000;
  c.n_subjects = 20000;
  c.n_calls = 240000;
  c.n_prior_cards = 8000;
  c.default_rate = 0.0449;
  auto w = generate_world(c);
  EXPECT_NEAR(subject_default_rate(w), 0.0449, 0.005);
}

TEST(Synth, NoHomophilyMeansNullMixing) {
  double d = 0, h = 0;
  const int seeds = 100;
  for (int s = 1; s <= seeds; ++s) {
    SynthConfig c;
    c.seed = static_cast<std::uint64_t>(s);
    c.n_nodes = 5000;
    c.n_calls = 30000;
    c.n_subjects = 1000;
    c.n_prior_cards = 500;
    c.risky_share = 0.0449;
    c.homophily_strength = 1.0;
    auto net = generate_network(c);
    auto r = homophily_test(network_graph(net), risky_labels(net));
    d += *r.dyadicity / seeds;
    h += r.heterophilicity / seeds;
  }
  EXPECT_NEAR(d, 1.0, 0.05);
  EXPECT_NEAR(h, 1.0, 0.05);
}

TEST(Synth, InvalidConfigRejected) {
  SynthConfig c = small(1);
  c.n_subjects = c.n_nodes + 1;
  EXPECT_THROW(c.validate(), UsageError);
  c = small(1);
  c.default_rate = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Synth, NoPlantedEffectMeansNoSignal) {
  double auc = 0;
  const int seeds = 2;
  for (int s = 1; s <= seeds; ++s) {
    auto c = small(static_cast<std::uint64_t>(20 + s));
    c.planted_feature_effect = 0;
    c.default_rate = 0.3;
    const auto dir = fs::temp_directory_path() / ("cdrscore_synth_null" + std::to_string(s));
    fs::remove_all(dir);
    write_dataset(generate_world(c), dir / "data");
    ExperimentConfig e;
    const SynthPaths p(dir / "data");
    e.cdr = p.cdr;
    e.accounts = p.accounts;
    e.transactions = p.transactions;
    e.cards = p.cards;
    e.out_dir = dir / "out";
    e.models = {"H"};
    e.train.forest.n_trees = 60;
    e.importance = false;
    e.save_models = false;
    auto res = run_pipeline(e);
    auc += res.models[0].report.auc / seeds;
    fs::remove_all(dir);
  }
  EXPECT_NEAR(auc, 0.5, 0.03);
}
