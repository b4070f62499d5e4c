// Acceptance checks, one PASS/FAIL line per criterion. Criteria 8, 10 and 11
// drive the command line tool on the reference configuration; the rest run
// in process against independent reference computations.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdrscore/cdrscore.hpp"

namespace fs = std::filesystem;
using namespace cdrscore;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << x;
  return s.str();
}

// ---------------------------------------------------------------------------
// Random graphs shared by criteria 1 and 2

struct RandomGraph {
  std::size_t n = 0;
  std::vector<WeightedEdge> edges;
  GraphMode mode = GraphMode::outgoing;
  CallGraph graph;
};

RandomGraph random_graph(Engine& eng) {
  RandomGraph r;
  r.n = std::uniform_int_distribution<std::size_t>(2, 100)(eng);
  r.mode = uniform01(eng) < 0.5 ? GraphMode::outgoing : GraphMode::undirected;
  const double density = 0.01 + 0.2 * uniform01(eng);
  for (NodeId u = 0; u < r.n; ++u)
    for (NodeId v = 0; v < r.n; ++v)
      if (u != v && uniform01(eng) < density) r.edges.push_back({u, v, 0.1 + 10 * uniform01(eng)});
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < r.n; ++i) ids.push_back("n" + std::to_string(i));
  r.graph = CallGraph::from_edges(NodeIndex(ids), r.edges, r.mode);
  return r;
}

std::vector<double> random_seeds(std::size_t n, Engine& eng) {
  std::vector<double> z(n, 0.0);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, n / 4))(eng);
  for (std::size_t i = 0; i < k; ++i) z[std::uniform_int_distribution<std::size_t>(0, n - 1)(eng)] = 1.0;
  return z;
}

// ---------------------------------------------------------------------------
// 1. PageRank against a dense linear solve

Outcome criterion_1() {
  const auto t0 = Clock::now();
  auto eng = make_engine(101, "c1");
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto rg = random_graph(eng);
    const auto z_raw = random_seeds(rg.n, eng);
    PropagationConfig cfg;
    cfg.tolerance = 1e-13;
    cfg.max_iterations = 2000;
    const auto pr = personalized_pagerank(rg.graph, z_raw, cfg);

    // dense oracle built straight from the raw edge list
    const auto n = static_cast<Eigen::Index>(rg.n);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);  // w(i, j): weight of the j -> i step
    for (const auto& e : rg.edges) {
      w(e.dst, e.src) += e.weight;
      if (rg.mode == GraphMode::undirected) w(e.src, e.dst) += e.weight;
    }
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(z_raw.data(), n);
    z /= z.sum();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double col = w.col(j).sum();
      if (col > 0) w.col(j) /= col;
      else w.col(j) = z;  // a dangling node hands its mass back to the restart vector
    }
    const double alpha = cfg.alpha;
    const Eigen::VectorXd xi = (Eigen::MatrixXd::Identity(n, n) - alpha * w).partialPivLu().solve((1 - alpha) * z);
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(xi(i) - pr.scores[static_cast<std::size_t>(i)]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 10.0,
          "max |power - solve| " + fmt(worst) + " (limit 1e-08), " + fmt(secs, 3) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------------------
// 2. Spreading activation conserves energy after every iteration

Outcome criterion_2() {
  auto eng = make_engine(102, "c2");
  double worst = 0;
  long iterations = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto rg = random_graph(eng);
    auto e0 = random_seeds(rg.n, eng);
    for (auto& e : e0)
      if (e > 0) e = 0.5 + 3 * uniform01(eng);
    double initial = 0;
    for (double e : e0) initial += e;
    PropagationConfig cfg;
    cfg.max_iterations = 500;
    spreading_activation(rg.graph, e0, cfg, [&](int, std::span<const double> energy) {
      double total = 0;
      for (double e : energy) total += e;
      worst = std::max(worst, std::abs(total - initial));
      ++iterations;
    });
  }
  return {worst <= 1e-9 && iterations > 0,
          "max |energy - initial| " + fmt(worst) + " over " + std::to_string(iterations) + " iterations (limit 1e-09)"};
}

// ---------------------------------------------------------------------------
// Random scored datasets shared by criteria 3 and 9

struct Scored {
  std::vector<double> score;
  std::vector<std::uint8_t> y;
};

Scored random_scored(std::size_t n, double base_rate, Engine& eng) {
  Scored d;
  std::normal_distribution<double> noise;
  const double shift = 0.3 + 1.5 * uniform01(eng);
  const bool coarse = uniform01(eng) < 0.5;  // rounded scores give plenty of ties
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = uniform01(eng) < base_rate;
    double s = shift * y + noise(eng);
    if (coarse) s = std::round(s * 4) / 4;
    d.y.push_back(y);
    d.score.push_back(s);
  }
  if (std::count(d.y.begin(), d.y.end(), 1) == 0) d.y[0] = 1;
  return d;
}

// ---------------------------------------------------------------------------
// 3. EMP against the brute-force grid, and the perfect classifier

Outcome criterion_3() {
  auto eng = make_engine(103, "c3");
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_scored(2000, 0.05, eng);
    EmpParams p;
    p.p0 = 0.2 + 0.5 * uniform01(eng);
    p.p1 = (1 - p.p0) * uniform01(eng);
    worst = std::max(worst, std::abs(emp(d.score, d.y, p).emp - emp_oracle(d.score, d.y, p, 10000)));
  }
  double worst_perfect = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_scored(2000, 0.05, eng);
    std::vector<double> perfect(d.y.begin(), d.y.end());
    EmpParams p;
    p.p0 = 0.6 * uniform01(eng);
    p.p1 = (1 - p.p0) * uniform01(eng);
    p.lgd = 0.3 + 0.7 * uniform01(eng);
    const double pi0 = double(std::count(d.y.begin(), d.y.end(), 1)) / double(d.y.size());
    // every defaulter is rejected for any positive loss; the expected loss is avoided
    const double closed = pi0 * (p.p1 * p.lgd + (1 - p.p0 - p.p1) * p.lgd / 2);
    worst_perfect = std::max(worst_perfect, std::abs(emp(perfect, d.y, p).emp - closed));
  }
  return {worst <= 1e-3 && worst_perfect <= 1e-6, "max |hull - grid| " + fmt(worst) + " (limit 1e-03), perfect classifier " +
                                                      fmt(worst_perfect) + " (limit 1e-06)"};
}

// ---------------------------------------------------------------------------
// 4. Profit per confusion-matrix cell, and no rejections equals no model

Outcome criterion_4() {
  EmpParams p;  // ROI 0.05, LGD 0.8
  const LoanOutcome good{100, 0, false}, bad{100, 80, true};
  const bool cells = loan_profit(good, false, p) == 500 && loan_profit(good, true, p) == -500 &&
                     loan_profit(bad, false, p) == -6400 && loan_profit(bad, true, p) == 0;

  auto eng = make_engine(104, "c4");
  bool sums = true, identity = true;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_scored(1000, 0.05, eng);
    std::vector<LoanOutcome> loans;
    for (auto y : d.y) {
      const double a = 500.0 * std::uniform_int_distribution<int>(1, 10)(eng);
      loans.push_back({a, y ? std::round(a * uniform01(eng) * 100) / 100 : 0.0, y != 0});
    }
    const double cut = fraction_to_cutoff(d.score, uniform01(eng) * 0.3);
    Cents by_hand = 0;
    for (std::size_t i = 0; i < loans.size(); ++i) {
      const bool rejected = d.score[i] >= cut;
      const auto& l = loans[i];
      if (l.is_defaulter) by_hand += rejected ? 0 : -std::llround(p.lgd * l.ead * 100);
      else by_hand += (rejected ? -1 : 1) * std::llround(p.roi * l.principal * 100);
    }
    sums = sums && model_profit(d.score, loans, p, cut).total == by_hand;
    const double zero_cut = fraction_to_cutoff(d.score, 0.0);
    identity = identity && model_profit(d.score, loans, p, zero_cut).total == no_model_profit(loans, p).total;
  }
  return {cells && sums && identity, std::string("cells ") + (cells ? "ok" : "wrong") + ", per-loan sums " +
                                         (sums ? "ok" : "wrong") + ", zero-rejection identity " +
                                         (identity ? "exact" : "broken")};
}

// ---------------------------------------------------------------------------
// 5. Importance recovers one planted feature among 30 noise columns

Outcome criterion_5() {
  constexpr int kRuns = 20, kNoise = 30;
  constexpr std::size_t n = 2000;
  int profit_first = 0, accuracy_first = 0;
  for (int run = 0; run < kRuns; ++run) {
    auto eng = make_engine(105, "c5", static_cast<std::uint64_t>(run));
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(n, kNoise + 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = z(eng);
    // the planted column is placed at a run-dependent position
    const auto planted = static_cast<Eigen::Index>(run % (kNoise + 1));
    std::vector<double> logit(n);
    for (std::size_t i = 0; i < n; ++i) logit[i] = 2.0 * x(static_cast<Eigen::Index>(i), planted);
    double lo = -20, hi = 20;
    for (int it = 0; it < 100; ++it) {
      const double mid = (lo + hi) / 2;
      double m = 0;
      for (double l : logit) m += 1 / (1 + std::exp(-(mid + l)));
      (m / double(n) < 0.05 ? lo : hi) = mid;
    }
    std::vector<std::uint8_t> y(n);
    std::vector<LoanOutcome> loans(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = uniform01(eng) < 1 / (1 + std::exp(-(lo + logit[i])));
      const double a = 500.0 * std::uniform_int_distribution<int>(1, 10)(eng);
      loans[i] = {a, y[i] ? a * uniform01(eng) : 0.0, y[i] != 0};
    }
    // the pipeline's protocol: stratified 70/30 split, 1:1 undersampling, default forest
    const auto sp = split(y, {0.7, substream_seed(run, "split"), true});
    const auto ytr = take(y, sp.train);
    const auto keep = undersample(ytr, 1.0, substream_seed(run, "undersample"));
    std::vector<std::size_t> rows;
    for (auto k : keep) rows.push_back(sp.train[k]);
    ForestConfig fc;
    fc.seed = substream_seed(run, "forest");
    const auto forest = train_forest(take_rows(x, rows), take(y, rows), fc);
    const auto xte = take_rows(x, sp.test);
    const auto yte = take(y, sp.test);
    const auto lte = take(loans, sp.test);
    const auto votes = forest.predict_per_tree(xte);
    const auto pi = profit_feature_importance(forest, votes, lte, EmpParams{});
    const auto ai = accuracy_feature_importance(forest, xte, yte, substream_seed(run, "permute"));
    profit_first += pi.front().value && pi.front().feature == static_cast<std::size_t>(planted);
    accuracy_first += ai.front().value && ai.front().feature == static_cast<std::size_t>(planted);
  }
  return {profit_first >= 18 && accuracy_first >= 18, "planted feature ranked first: profit " +
                                                          std::to_string(profit_first) + "/20, accuracy " +
                                                          std::to_string(accuracy_first) + "/20 (need 18)"};
}

// ---------------------------------------------------------------------------
// 6. Homophily statistics: permutation null and planted homophily

CallGraph network_graph(const SynthConfig& cfg, const SynthNetwork& net) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < cfg.n_nodes; ++i) ids.push_back(synth_phone_id(i));
  return CallGraph::from_edges(NodeIndex(ids), net.edges, GraphMode::undirected);
}

SynthConfig homophily_config(std::uint64_t seed, double strength) {
  SynthConfig cfg;
  cfg.n_nodes = 5000;
  cfg.n_subjects = 1000;
  cfg.n_prior_cards = 1000;
  cfg.n_calls = 30000;
  cfg.risky_share = 0.0449;  // labeled class as rare as defaulters
  cfg.homophily_strength = strength;
  cfg.seed = seed;
  return cfg;
}

Outcome criterion_6() {
  // null: shuffle the labels of one planted network
  const auto cfg = homophily_config(1, 4.0);
  const auto net = generate_network(cfg);
  const auto g = network_graph(cfg, net);
  std::vector<std::uint8_t> base(net.risky);
  auto eng = make_engine(106, "c6");
  double sum_d = 0, sum_h = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::shuffle(base.begin(), base.end(), eng);
    DefaultLabels labels(base.begin(), base.end());
    const auto r = homophily_test(g, labels);
    sum_d += *r.dyadicity;
    sum_h += r.heterophilicity;
  }
  const double mean_d = sum_d / 1000, mean_h = sum_h / 1000;

  int significant = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto c = homophily_config(seed, 4.0);
    const auto nw = generate_network(c);
    DefaultLabels labels(nw.risky.begin(), nw.risky.end());
    significant += homophily_test(network_graph(c, nw), labels).p_value < 0.05;
  }
  const bool pass = mean_d >= 0.95 && mean_d <= 1.05 && mean_h >= 0.95 && mean_h <= 1.05 && significant >= 95;
  return {pass, "permutation null mean D " + fmt(mean_d) + ", H " + fmt(mean_h) + " (range [0.95, 1.05]); strength 4: p < 0.05 in " +
                    std::to_string(significant) + "/100 seeds (need 95)"};
}

// ---------------------------------------------------------------------------
// 7. DeLong variance against the quadratic oracle, and null calibration

double oracle_delong_variance(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<std::uint8_t>& y) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
  const double m = double(pos.size()), n = double(neg.size());
  auto psi = [](double x, double z) { return x > z ? 1.0 : (x == z ? 0.5 : 0.0); };
  auto components = [&](const std::vector<double>& s, std::vector<double>& v10, std::vector<double>& v01) {
    for (auto i : pos) {
      double t = 0;
      for (auto j : neg) t += psi(s[i], s[j]);
      v10.push_back(t / n);
    }
    for (auto j : neg) {
      double t = 0;
      for (auto i : pos) t += psi(s[i], s[j]);
      v01.push_back(t / m);
    }
  };
  std::vector<double> a10, a01, b10, b01;
  components(a, a10, a01);
  components(b, b10, b01);
  auto cov = [](const std::vector<double>& u, const std::vector<double>& v) {
    double mu = 0, mv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) mu += u[i], mv += v[i];
    mu /= double(u.size());
    mv /= double(v.size());
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - mu) * (v[i] - mv);
    return s / double(u.size() - 1);
  };
  return (cov(a10, a10) + cov(b10, b10) - 2 * cov(a10, b10)) / m + (cov(a01, a01) + cov(b01, b01) - 2 * cov(a01, b01)) / n;
}

Outcome criterion_7() {
  auto eng = make_engine(107, "c7");
  std::normal_distribution<double> z;
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(10, 200)(eng);
    std::vector<double> a(n), b(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i < 4 ? i % 2 : uniform01(eng) < 0.3;
      a[i] = std::round((y[i] + z(eng)) * 3) / 3;
      b[i] = 0.5 * y[i] + z(eng);
    }
    worst = std::max(worst, std::abs(delong_test(a, b, y).variance - oracle_delong_variance(a, b, y)));
  }

  // exchangeable score pairs: the null holds exactly
  std::vector<double> pvals;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 400;
    std::vector<double> a(n), b(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i < 4 ? i % 2 : uniform01(eng) < 0.25;
      const double common = 0.8 * y[i] + z(eng);
      a[i] = common + z(eng);
      b[i] = common + z(eng);
    }
    pvals.push_back(delong_test(a, b, y).p_value);
  }
  std::sort(pvals.begin(), pvals.end());
  double ks = 0;
  const double nn = double(pvals.size());
  for (std::size_t i = 0; i < pvals.size(); ++i)
    ks = std::max({ks, double(i + 1) / nn - pvals[i], pvals[i] - double(i) / nn});
  const double critical = 1.6276 / std::sqrt(nn);  // Kolmogorov distribution, 1% level
  return {worst <= 1e-10 && ks < critical, "max |variance - oracle| " + fmt(worst) + " (limit 1e-10), KS D " + fmt(ks) +
                                              " vs 1% critical " + fmt(critical)};
}

// ---------------------------------------------------------------------------
// 9. EMP never increases with ROI on fixed scores

Outcome criterion_9(const fs::path& sweep_csv) {
  const std::vector<double> grid{0.01, 0.02, 0.03, 0.04, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2};
  auto eng = make_engine(109, "c9");
  int violations = 0, sweeps = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto d = random_scored(2000, 0.05, eng);
    const auto rows = sensitivity_sweep(d.score, d.y, EmpParams{}, SweepParameter::roi, grid);
    for (std::size_t k = 1; k < rows.size(); ++k) violations += rows[k].emp > rows[k - 1].emp;
    ++sweeps;
  }
  std::string pipeline = "pipeline sweep not available";
  if (fs::exists(sweep_csv)) {
    std::ifstream in(sweep_csv);
    const auto t = csv::Table::read(in, sweep_csv.string());
    const auto c = t.column("emp");
    int local = 0;
    for (std::size_t r = 1; r < t.rows().size(); ++r)
      local += *csv::parse_double(t.cell(r, c)) > *csv::parse_double(t.cell(r - 1, c));
    violations += local;
    ++sweeps;
    pipeline = "pipeline sweep " + std::string(local ? "increases" : "non-increasing") + " over " +
               std::to_string(t.rows().size()) + " points";
  }
  return {violations == 0, std::to_string(sweeps) + " sweeps, " + std::to_string(violations) + " increases; " + pipeline};
}

// ---------------------------------------------------------------------------
// Driving the command line tool

struct ChildResult {
  int exit_code = -1;
  double seconds = 0;
  long max_rss_kb = 0;
};

ChildResult run_child(const std::vector<std::string>& args, const fs::path& log) {
  ChildResult r;
  const auto t0 = Clock::now();
  const pid_t pid = fork();
  if (pid == 0) {
    std::FILE* f = std::fopen(log.c_str(), "w");
    if (f) {
      dup2(fileno(f), STDOUT_FILENO);
      dup2(fileno(f), STDERR_FILENO);
    }
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execv(argv[0], argv.data());
    _exit(127);
  }
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  r.seconds = seconds_since(t0);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.max_rss_kb = usage.ru_maxrss;
  return r;
}

std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const auto* dir : {&a, &b})
    for (const auto& e : fs::recursive_directory_iterator(*dir))
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), *dir).string());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  std::vector<std::string> diff;
  for (const auto& n : names)
    if (!fs::exists(a / n) || !fs::exists(b / n) || slurp(a / n) != slurp(b / n)) diff.push_back(n);
  return diff;
}

struct EndToEnd {
  bool ran = false;
  std::string failure;
  ChildResult synth, run1, run2;
  fs::path out1, out2;
};

EndToEnd end_to_end(const std::string& cli, const fs::path& config, const fs::path& work) {
  EndToEnd e;
  fs::remove_all(work);
  fs::create_directories(work);
  const auto data = work / "data";
  e.out1 = work / "run1";
  e.out2 = work / "run2";
  e.synth = run_child({cli, "synth", "--config", config.string(), "--out", data.string()}, work / "synth.log");
  if (e.synth.exit_code != 0) {
    e.failure = "synth exited with " + std::to_string(e.synth.exit_code);
    return e;
  }
  e.run1 = run_child({cli, "run", "--config", config.string(), "--data", data.string(), "--out", e.out1.string()},
                     work / "run1.log");
  if (e.run1.exit_code != 0) {
    e.failure = "run exited with " + std::to_string(e.run1.exit_code) + " (see " + (work / "run1.log").string() + ")";
    return e;
  }
  e.run2 = run_child({cli, "run", "--config", config.string(), "--data", data.string(), "--out", e.out2.string()},
                     work / "run2.log");
  if (e.run2.exit_code != 0) {
    e.failure = "second run exited with " + std::to_string(e.run2.exit_code);
    return e;
  }
  e.ran = true;
  return e;
}

// ---------------------------------------------------------------------------
// 8. Combined feature groups beat single groups; EMP agrees with AUC

Outcome criterion_8(const EndToEnd& e) {
  if (!e.ran) return {false, e.failure};
  std::ifstream in(e.out1 / "report.json");
  const auto r = nlohmann::json::parse(in);
  std::map<std::string, double> auc, emp_v;
  for (const auto& m : r["models"]) {
    auc[m["id"]] = m["auc"];
    emp_v[m["id"]] = m["emp"];
  }
  const std::string combined = "FGH", single = "ABCDE";
  int significant = 0, compared = 0;
  std::string misses;
  for (const auto& d : r["delong"]) {
    const std::string a = d["a"], b = d["b"];
    if ((combined.find(a) != std::string::npos) == (combined.find(b) != std::string::npos)) continue;
    ++compared;
    const std::string& c = combined.find(a) != std::string::npos ? a : b;
    const std::string& s = c == a ? b : a;
    const bool better = auc[c] > auc[s];
    if (better && double(d["p_value"]) < 0.05) ++significant;
    else misses += " " + c + ">" + s + "(p " + fmt(double(d["p_value"]), 3) + ")";
  }
  std::vector<double> a_list, e_list;
  for (const auto& [id, v] : auc) {
    a_list.push_back(v);
    e_list.push_back(emp_v[id]);
  }
  const double rho = rank_correlations(a_list, e_list).spearman;
  const bool pass = auc["H"] > auc["A"] && compared == 15 && significant == compared && rho > 0;
  return {pass, "AUC H " + fmt(auc["H"]) + " vs A " + fmt(auc["A"]) + "; combined beat single at 95% in " +
                    std::to_string(significant) + "/" + std::to_string(compared) + (misses.empty() ? "" : " missing:" + misses) +
                    "; Spearman(EMP, AUC) " + fmt(rho)};
}

// ---------------------------------------------------------------------------
// 10. Full-scale time and memory

Outcome criterion_10(const EndToEnd& e) {
  if (!e.ran) return {false, e.failure};
  const double secs = e.synth.seconds + e.run1.seconds;
  const double rss_mb = double(std::max(e.synth.max_rss_kb, e.run1.max_rss_kb)) / 1024.0;
  const unsigned cores = std::thread::hardware_concurrency();
  return {secs < 300 && rss_mb < 1024, "synth + run " + fmt(secs, 4) + " s (limit 300 s) on " + std::to_string(cores) +
                                           " core(s), peak RSS " + fmt(rss_mb, 4) + " MB (limit 1024 MB)"};
}

// ---------------------------------------------------------------------------
// 11. Two identical runs, byte-identical outputs

Outcome criterion_11(const EndToEnd& e) {
  if (!e.ran) return {false, e.failure};
  const auto diff = differing_files(e.out1, e.out2);
  std::size_t files = 0;
  for (const auto& f : fs::recursive_directory_iterator(e.out1)) files += f.is_regular_file();
  std::string which;
  for (const auto& d : diff) which += " " + d;
  return {diff.empty() && files > 0, std::to_string(files) + " output files compared, " + std::to_string(diff.size()) +
                                         " differ" + which};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli, work = "acceptance_work", config;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--work" && i + 1 < argc) work = argv[++i];
    else if (a == "--config" && i + 1 < argc) config = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.insert(std::stoi(argv[++i]));
    else {
      std::cerr << "usage: acceptance --cli <cdrscore binary> --config <ini> [--work dir] [--only N]...\n";
      return 1;
    }
  }
  auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };

  int failed = 0;
  auto report = [&](int k, const std::string& title, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << title << " -- " << o.detail << std::endl;
    failed += !o.pass;
  };
  auto guarded = [&](int k, const std::string& title, const std::function<Outcome()>& fn) {
    if (!wanted(k)) return;
    try {
      report(k, title, fn());
    } catch (const std::exception& ex) {
      report(k, title, {false, std::string("threw: ") + ex.what()});
    }
  };

  guarded(1, "PageRank matches dense solve", criterion_1);
  guarded(2, "spreading activation conserves energy", criterion_2);
  guarded(3, "EMP matches brute-force oracle", criterion_3);
  guarded(4, "model profit identities", criterion_4);
  guarded(5, "importance recovers planted feature", criterion_5);
  guarded(6, "homophily statistics calibrated", criterion_6);
  guarded(7, "DeLong variance and null calibration", criterion_7);

  EndToEnd e;
  if (wanted(8) || wanted(9) || wanted(10) || wanted(11)) {
    if (cli.empty() || config.empty()) e.failure = "no --cli/--config given";
    else e = end_to_end(cli, config, work);
  }
  guarded(8, "combined models dominate single-group models", [&] { return criterion_8(e); });
  guarded(9, "EMP non-increasing in ROI", [&] { return criterion_9(e.out1 / "sweep_roi.csv"); });
  guarded(10, "full-scale time and memory", [&] { return criterion_10(e); });
  guarded(11, "byte-identical reruns", [&] { return criterion_11(e); });
  return failed == 0 ? 0 : 1;
}
