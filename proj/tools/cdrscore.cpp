// Command line front end: one subcommand per pipeline stage plus `run`.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cdrscore/cdrscore.hpp"

namespace fs = std::filesystem;
using namespace cdrscore;

namespace {

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

char delimiter_from(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s.size() != 1) throw UsageError("delimiter must be a single character");
  return s[0];
}

Date date_from(const std::string& s) {
  auto d = calendar::parse_iso_date(s);
  if (!d) d = calendar::parse_cdr_date(s);
  if (!d) throw UsageError("invalid date '" + s + "' (expected YYYY-MM-DD)");
  return *d;
}

YearMonth month_from(const std::string& s) {
  auto m = calendar::parse_year_month(s);
  if (!m) throw UsageError("invalid month '" + s + "' (expected YYYY-MM)");
  return *m;
}

struct BankFiles {
  std::string accounts, transactions, cards;

  void add(CLI::App* app, bool required) {
    auto* a = app->add_option("--accounts", accounts, "Accounts CSV (customer_id, age, marital_status, postcode)");
    auto* t = app->add_option("--transactions", transactions, "Debit transactions CSV (customer_id, date, amount)");
    auto* c = app->add_option("--cards", cards, "Card activity CSV (issue_date, credit_limit, drawn_k, arrears_k)");
    if (required) {
      a->required();
      t->required();
      c->required();
    }
  }
  bool given() const { return !accounts.empty() && !transactions.empty() && !cards.empty(); }
  BankData load(char delim = ',') const { return ingest_bank_files(accounts, transactions, cards, delim); }
};

void add_propagation_options(CLI::App* app, PropagationConfig& p) {
  app->add_option("--alpha", p.alpha, "PageRank probability of following an edge")->capture_default_str();
  app->add_option("--d", p.d, "Spreading activation spread fraction")->capture_default_str();
  app->add_option("--tol", p.tolerance, "Convergence tolerance")->capture_default_str();
  app->add_option("--max-iter", p.max_iterations, "Iteration limit")->capture_default_str();
}

std::string dump_json(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

// Features and labels for a model id, restricted to the rows of one part.
struct ModelData {
  Eigen::MatrixXd x;
  std::vector<std::uint8_t> y;
  std::vector<std::size_t> rows;
};

std::vector<std::size_t> read_split(const fs::path& p, const FeatureMatrix& m, const std::string& part) {
  auto in = open_in(p);
  const auto t = csv::Table::read(in, p.string());
  const auto c_id = t.column("subject_id"), c_tf = t.column("timeframe"), c_part = t.column("part");
  std::map<std::pair<std::string, int>, std::size_t> row_of;
  for (std::size_t i = 0; i < m.rows(); ++i) row_of[{m.subject_ids[i], m.timeframe[i]}] = i;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    if (t.cell(r, c_part) != part) continue;
    auto tf = csv::parse_int<int>(t.cell(r, c_tf));
    if (!tf) throw RowError(t.line_number(r), "bad timeframe");
    auto it = row_of.find({std::string(t.cell(r, c_id)), *tf});
    if (it == row_of.end()) throw RowError(t.line_number(r), "subject not in the feature matrix");
    rows.push_back(it->second);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

ModelData model_data(const FeatureMatrix& m, const std::vector<std::string>& names, std::vector<std::size_t> rows) {
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto c = m.column(n);
    if (!c) throw DataError("feature '" + n + "' missing from the feature matrix");
    cols.push_back(*c);
  }
  ModelData d;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m.values(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
    d.y.push_back(m.y_default[rows[i]]);
  }
  d.rows = std::move(rows);
  return d;
}

FeatureMatrix load_features(const std::string& path) {
  auto in = open_in(path);
  return read_feature_matrix(in);
}

std::vector<LoanOutcome> loans_for_ids(const std::vector<std::string>& ids, const BankData& bank) {
  std::vector<LoanOutcome> loans;
  for (const auto& id : ids) {
    const auto* r = bank.find(id);
    if (!r) throw DataError("no card record for '" + id + "'");
    loans.push_back({r->credit_limit, r->exposure_at_default(), r->is_default()});
  }
  return loans;
}

std::vector<double> parse_grid(const std::vector<double>& g) {
  if (g.empty()) throw UsageError("empty grid");
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Credit scoring from call networks"};
  app.set_config("--config", "", "Key-value config file; options go under a [subcommand] section");
  app.fallthrough();
  app.require_subcommand(1);
  std::string delimiter = ",";
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic CDR and bank dataset");
  SynthConfig sc;
  std::string synth_out = "data", synth_start = "2015-01", synth_degree = "powerlaw";
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth->add_option("--seed", sc.seed)->capture_default_str();
  synth->add_option("--nodes", sc.n_nodes)->capture_default_str();
  synth->add_option("--subjects", sc.n_subjects)->capture_default_str();
  synth->add_option("--calls", sc.n_calls)->capture_default_str();
  synth->add_option("--months", sc.months, "Months of calls; cohorts = months - 2")->capture_default_str();
  synth->add_option("--start", synth_start, "First call month (YYYY-MM)")->capture_default_str();
  synth->add_option("--default-rate", sc.default_rate)->capture_default_str();
  synth->add_option("--homophily", sc.homophily_strength)->capture_default_str();
  synth->add_option("--degree", synth_degree, "powerlaw or poisson")->capture_default_str();
  synth->add_option("--degree-exponent", sc.degree_exponent)->capture_default_str();
  synth->add_option("--degree-cutoff", sc.degree_cutoff)->capture_default_str();
  synth->add_option("--calls-per-edge", sc.calls_per_edge)->capture_default_str();
  synth->add_option("--risky-share", sc.risky_share)->capture_default_str();
  synth->add_option("--bank-share", sc.bank_share)->capture_default_str();
  synth->add_option("--prior-cards", sc.n_prior_cards)->capture_default_str();
  synth->add_option("--effect", sc.planted_feature_effect, "Scale of every planted default effect")->capture_default_str();
  synth->add_option("--beta-risky", sc.beta_risky)->capture_default_str();
  synth->add_option("--beta-latent", sc.beta_latent)->capture_default_str();
  synth->add_option("--beta-neighbors", sc.beta_neighbors)->capture_default_str();

  // ingest -----------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Validate a CDR log and report counts");
  std::string ingest_cdr_path, ingest_out;
  CdrIngestOptions iopt;
  ingest->add_option("--cdr", ingest_cdr_path)->required();
  ingest->add_option("--min-duration", iopt.min_duration, "Discard calls shorter than this (seconds)")->capture_default_str();
  ingest->add_option("--delimiter", delimiter)->capture_default_str();
  ingest->add_option("--rejections", ingest_out, "Write the rejection log here");
  BankFiles ingest_bank_files_opt;
  ingest_bank_files_opt.add(ingest, false);

  // build-graph ------------------------------------------------------------
  auto* bg = app.add_subcommand("build-graph", "Build one call network over a date window");
  std::string bg_cdr, bg_mode = "ud", bg_out = "graph", bg_weight = "count", bg_card_month;
  std::vector<std::string> bg_window;
  CdrIngestOptions bg_opt;
  BankFiles bg_bank;
  bg->add_option("--cdr", bg_cdr)->required();
  bg->add_option("--mode", bg_mode, "in, out or ud")->capture_default_str();
  bg->add_option("--window", bg_window, "First and last day (YYYY-MM-DD)")->expected(2)->required();
  bg->add_option("--weight", bg_weight, "count or duration")->capture_default_str();
  bg->add_option("--min-duration", bg_opt.min_duration)->capture_default_str();
  bg->add_option("--out", bg_out, "Output prefix: <out>_edges.csv, <out>_nodes.csv, <out>_degrees.csv, with --card-month also <out>_labels.csv and <out>_defaults.csv")->capture_default_str();
  bg->add_option("--card-month", bg_card_month, "Cohort card month (YYYY-MM) for node labels");
  bg_bank.add(bg, false);

  // propagate --------------------------------------------------------------
  auto* prop = app.add_subcommand("propagate", "Compute exposure scores on a stored graph");
  std::string pr_graph = "graph", pr_method = "pr", pr_seeds = "ge1", pr_out = "exposure.csv", pr_mode = "ud",
              pr_energy = "uniform";
  PropagationConfig pcfg;
  prop->add_option("--graph", pr_graph, "Graph prefix written by build-graph")->capture_default_str();
  prop->add_option("--mode", pr_mode, "Mode the graph was built in")->capture_default_str();
  prop->add_option("--method", pr_method, "pr or spa")->capture_default_str();
  prop->add_option("--seeds", pr_seeds, "ge1, ge2 or ge3")->capture_default_str();
  prop->add_option("--energy", pr_energy, "SPA seed energy: uniform or severity")->capture_default_str();
  prop->add_option("--out", pr_out)->capture_default_str();
  add_propagation_options(prop, pcfg);

  // featurize --------------------------------------------------------------
  auto* feat = app.add_subcommand("featurize", "Extract the feature matrix for every cohort");
  std::string ft_cdr, ft_out = "features.csv";
  std::vector<std::string> ft_groups{"sd", "cb", "lb", "pr", "spa"};
  double ft_corr = 0;
  FeaturizeConfig fcfg;
  CdrIngestOptions ft_opt;
  BankFiles ft_bank;
  feat->add_option("--cdr", ft_cdr)->required();
  ft_bank.add(feat, true);
  feat->add_option("--groups", ft_groups, "Comma-separated groups")->delimiter(',')->capture_default_str();
  feat->add_option("--corr-threshold", ft_corr, "Drop correlated features above this |rho| (0 = keep all)");
  feat->add_option("--min-duration", ft_opt.min_duration)->capture_default_str();
  feat->add_option("--out", ft_out)->capture_default_str();
  add_propagation_options(feat, fcfg.propagation);

  // netstats ---------------------------------------------------------------
  auto* ns = app.add_subcommand("netstats", "Homophily, dyadicity and heterophilicity of default labels");
  std::string ns_graph = "graph", ns_labels, ns_column = "is_default", ns_out;
  ns->add_option("--graph", ns_graph, "Graph prefix written by build-graph (undirected)")->capture_default_str();
  ns->add_option("--labels", ns_labels, "CSV with phone_id and a 0/1/NA label column")->required();
  ns->add_option("--label-column", ns_column)->capture_default_str();
  ns->add_option("--out", ns_out, "JSON report path");

  // train / predict --------------------------------------------------------
  auto* train = app.add_subcommand("train", "Fit one model on the training part of the feature matrix");
  std::string tr_features, tr_id = "H", tr_kind = "forest", tr_out = "model.json", tr_split_out = "split.csv";
  double tr_corr = 0.95, tr_ratio = 1.0, tr_fraction = 0.7;
  std::uint64_t tr_seed = 42;
  TrainConfig tcfg;
  train->add_option("--features", tr_features)->required();
  train->add_option("--model-id", tr_id, "Feature specification A-H")->capture_default_str();
  train->add_option("--model", tr_kind, "logit, tree or forest")->capture_default_str();
  train->add_option("--seed", tr_seed)->capture_default_str();
  train->add_option("--trees", tcfg.forest.n_trees)->capture_default_str();
  train->add_option("--mtry", tcfg.forest.mtry, "0 = ceil(sqrt(M))")->capture_default_str();
  train->add_option("--corr-threshold", tr_corr)->capture_default_str();
  train->add_option("--undersample-ratio", tr_ratio)->capture_default_str();
  train->add_option("--train-fraction", tr_fraction)->capture_default_str();
  train->add_option("--out", tr_out)->capture_default_str();
  train->add_option("--split-out", tr_split_out)->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Score a part of the feature matrix with a saved model");
  std::string pd_features, pd_model, pd_split, pd_part = "test", pd_out = "scores.csv";
  predict->add_option("--features", pd_features)->required();
  predict->add_option("--model", pd_model)->required();
  predict->add_option("--split", pd_split, "Split file from train; all rows when omitted");
  predict->add_option("--part", pd_part)->capture_default_str();
  predict->add_option("--out", pd_out)->capture_default_str();

  // evaluate / compare / sweep / importance --------------------------------
  EmpParams ep;
  std::optional<double> p0_opt, p1_opt;
  auto add_emp = [&](CLI::App* a) {
    a->add_option("--roi", ep.roi)->capture_default_str();
    a->add_option("--lgd", ep.lgd)->capture_default_str();
    a->add_option("--p0", p0_opt, "Mass of lambda at 0 (estimated from defaulters when omitted)");
    a->add_option("--p1", p1_opt, "Mass of lambda at LGD (estimated from defaulters when omitted)");
  };
  auto resolve_emp = [&](const std::vector<LoanOutcome>& loans) {
    if (!p0_opt || !p1_opt) {
      auto [p0, p1] = estimate_lambda_masses(loans);
      ep.p0 = p0_opt.value_or(p0);
      ep.p1 = p1_opt.value_or(p1);
    } else {
      ep.p0 = *p0_opt;
      ep.p1 = *p1_opt;
    }
    ep.validate();
  };

  auto* eval = app.add_subcommand("evaluate", "AUC, EMP, implied cutoff and model profit of a score file");
  std::string ev_scores, ev_out;
  BankFiles ev_bank;
  eval->add_option("--scores", ev_scores)->required();
  ev_bank.add(eval, true);
  eval->add_option("--out", ev_out, "JSON report path");
  add_emp(eval);

  auto* cmp = app.add_subcommand("compare", "Pairwise DeLong tests between score files");
  std::vector<std::string> cmp_scores;
  std::string cmp_out;
  bool cmp_delong = true;
  cmp->add_option("--scores", cmp_scores, "Two or more score files on the same instances")->required()->expected(2, -1);
  cmp->add_flag("--delong", cmp_delong, "DeLong paired test (the only comparison offered)");
  cmp->add_option("--out", cmp_out, "CSV output path");

  auto* sweep = app.add_subcommand("sweep", "EMP over a grid of ROI or LGD values on fixed scores");
  std::string sw_scores, sw_param = "roi", sw_out;
  std::vector<double> sw_grid{0.01, 0.02, 0.05, 0.1, 0.15, 0.2};
  BankFiles sw_bank;
  sweep->add_option("--scores", sw_scores)->required();
  sweep->add_option("--param", sw_param, "roi or lgd")->capture_default_str();
  sweep->add_option("--grid", sw_grid)->delimiter(',')->capture_default_str();
  sweep->add_option("--out", sw_out, "CSV output path");
  sw_bank.add(sweep, false);
  add_emp(sweep);

  auto* imp = app.add_subcommand("importance", "Profit or accuracy based feature importance of a forest");
  std::string im_features, im_model, im_split, im_kind = "profit", im_variant = "permutation", im_out;
  std::uint64_t im_seed = 42;
  BankFiles im_bank;
  imp->add_option("--features", im_features)->required();
  imp->add_option("--model", im_model)->required();
  imp->add_option("--split", im_split)->required();
  imp->add_option("--kind", im_kind, "profit or accuracy")->capture_default_str();
  imp->add_option("--variant", im_variant, "accuracy variant: permutation or membership")->capture_default_str();
  imp->add_option("--seed", im_seed)->capture_default_str();
  imp->add_option("--out", im_out, "CSV output path");
  im_bank.add(imp, false);
  add_emp(imp);

  // run --------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Full pipeline: ingest, graphs, features, models, evaluation");
  ExperimentConfig ec;
  std::string run_data, run_out = "out", run_classifier = "forest", run_energy = "uniform";
  std::vector<double> roi_grid = ec.roi_grid, lgd_grid = ec.lgd_grid;
  bool no_importance = false, no_models = false;
  run->add_option("--data", run_data, "Directory holding cdr.csv, accounts.csv, transactions.csv, cards.csv");
  std::string run_cdr;
  BankFiles run_bank;
  run->add_option("--cdr", run_cdr);
  run_bank.add(run, false);
  run->add_option("--out", run_out)->capture_default_str();
  run->add_option("--seed", ec.seed)->capture_default_str();
  run->add_option("--models", ec.models, "Model ids A-H")->delimiter(',')->capture_default_str();
  run->add_option("--classifier", run_classifier, "logit, tree or forest")->capture_default_str();
  run->add_option("--trees", ec.train.forest.n_trees)->capture_default_str();
  run->add_option("--mtry", ec.train.forest.mtry, "0 = ceil(sqrt(M))")->capture_default_str();
  run->add_option("--min-leaf", ec.train.forest.min_leaf)->capture_default_str();
  run->add_option("--corr-threshold", ec.corr_threshold)->capture_default_str();
  run->add_option("--undersample-ratio", ec.undersample_ratio)->capture_default_str();
  run->add_option("--train-fraction", ec.train_fraction)->capture_default_str();
  run->add_option("--min-duration", ec.ingest.min_duration)->capture_default_str();
  run->add_option("--delimiter", delimiter)->capture_default_str();
  run->add_option("--energy", run_energy, "SPA seed energy: uniform or severity")->capture_default_str();
  run->add_option("--day-start", ec.featurize.day.day_start_hour)->capture_default_str();
  run->add_option("--night-start", ec.featurize.day.night_start_hour)->capture_default_str();
  run->add_option("--importance-model", ec.importance_model)->capture_default_str();
  run->add_flag("--no-importance", no_importance);
  run->add_flag("--no-save-models", no_models);
  run->add_option("--roi-grid", roi_grid)->delimiter(',');
  run->add_option("--lgd-grid", lgd_grid)->delimiter(',');
  add_propagation_options(run, ec.featurize.propagation);
  add_emp(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    const char delim = delimiter_from(delimiter);
    if (*synth) {
      auto m = month_from(synth_start);
      sc.start = m;
      if (synth_degree == "powerlaw") sc.degree = DegreeModel::power_law;
      else if (synth_degree == "poisson") sc.degree = DegreeModel::poisson;
      else throw UsageError("degree must be powerlaw or poisson");
      const auto world = generate_world(sc);
      write_dataset(world, synth_out);
      std::size_t subjects = 0, defaults = 0;
      for (std::size_t k = 0; k < world.cards.size(); ++k)
        if (world.role[world.card_node[k]] == NodeRole::subject) {
          ++subjects;
          defaults += world.cards[k].is_default();
        }
      std::cout << "wrote " << world.calls.size() << " calls, " << world.accounts.size() << " accounts, "
                << world.cards.size() << " cards to " << synth_out << "\n"
                << "subjects " << subjects << ", realized default rate "
                << (subjects ? double(defaults) / double(subjects) : 0.0) << "\n";
    } else if (*ingest) {
      iopt.delimiter = delim;
      const auto r = ingest_cdr_file(ingest_cdr_path, iopt);
      nlohmann::ordered_json j{{"rows_read", r.stats.rows_read},
                               {"rows_accepted", r.stats.rows_accepted()},
                               {"rows_rejected", r.stats.rows_rejected},
                               {"rows_filtered_short", r.stats.rows_filtered_short},
                               {"distinct_ids", r.stats.distinct_ids}};
      if (!ingest_out.empty()) {
        auto out = open_out(ingest_out);
        write_rejection_log(out, r.rejections);
      }
      if (ingest_bank_files_opt.given()) {
        const auto b = ingest_bank_files_opt.load(delim);
        j["bank"] = {{"accounts", b.stats.accounts},
                     {"card_holders", b.records.size()},
                     {"transactions", b.stats.transactions},
                     {"orphan_transactions", b.stats.orphan_transactions},
                     {"orphan_cards", b.stats.orphan_cards},
                     {"excluded_no_card", b.stats.excluded_no_card}};
        for (const auto& issue : b.issues) std::cerr << issue << "\n";
      }
      std::cout << dump_json(j);
    } else if (*bg) {
      bg_opt.delimiter = delim;
      const auto r = ingest_cdr_file(bg_cdr, bg_opt);
      const DateRange window{date_from(bg_window[0]), date_from(bg_window[1])};
      if (window.last < window.first) throw UsageError("window end precedes its start");
      const auto weighting = bg_weight == "count" ? EdgeWeighting::call_count
                             : bg_weight == "duration" ? EdgeWeighting::total_duration
                                                       : throw UsageError("weight must be count or duration");
      const auto g = build_graph(r.records, window, parse_mode(bg_mode), weighting);
      {
        auto e = open_out(bg_out + "_edges.csv");
        write_edge_list(e, g);
        auto n = open_out(bg_out + "_nodes.csv");
        write_node_index(n, g.index());
      }
      if (!bg_card_month.empty()) {
        if (!bg_bank.given()) throw UsageError("--card-month needs --accounts, --transactions and --cards");
        const auto bank = bg_bank.load(delim);
        auto l = open_out(bg_out + "_labels.csv");
        write_labels(l, g.index(), label_nodes(g.index(), bank, month_from(bg_card_month)));
        // card holders' final default flag, the input netstats expects
        auto d = open_out(bg_out + "_defaults.csv");
        d << "phone_id,is_default\n";
        const auto dl = default_labels(g.index(), bank);
        for (std::size_t v = 0; v < dl.size(); ++v)
          d << csv::quote_if_needed(g.index().id_of(v)) << ',' << (dl[v] ? (*dl[v] ? "1" : "0") : "NA") << '\n';
      }
      std::cout << "nodes " << g.n_nodes() << ", edges " << g.n_edges() << ", calls outside window "
                << g.records_outside_window << "\n";
      auto dd = open_out(bg_out + "_degrees.csv");
      dd << "degree,count\n";
      for (auto [deg, count] : degree_distribution(g)) dd << deg << ',' << count << '\n';
    } else if (*prop) {
      pcfg.validate();
      auto e = open_in(pr_graph + "_edges.csv");
      auto n = open_in(pr_graph + "_nodes.csv");
      const auto g = read_graph(e, n, parse_mode(pr_mode));
      auto l = open_in(pr_graph + "_labels.csv");
      const auto labels = read_labels(l, g.index());
      const auto seeds = parse_seed_criterion(pr_seeds);
      ExposureVector x;
      if (pr_method == "pr") {
        x = personalized_pagerank(g, labels, seeds, pcfg);
      } else if (pr_method == "spa") {
        const auto energy = pr_energy == "uniform" ? SeedEnergy::uniform
                            : pr_energy == "severity" ? SeedEnergy::severity
                                                      : throw UsageError("energy must be uniform or severity");
        x = spreading_activation(g, labels, seeds, pcfg, energy);
      } else {
        throw UsageError("method must be pr or spa");
      }
      auto out = open_out(pr_out);
      write_exposure(out, g.index(), x);
      std::cout << "iterations " << x.iterations_run << ", residual " << x.residual;
      try {
        const double cut = exposure_cutoff(x, labels);
        std::cout << ", cutoff " << cut << ", high-risk nodes " << relabel_high_risk(x, cut).n_high;
      } catch (const DataError& err) {
        std::cout << ", " << err.what();
      }
      std::cout << "\n";
    } else if (*feat) {
      ft_opt.delimiter = delim;
      fcfg.groups.clear();
      for (const auto& g : ft_groups) fcfg.groups.push_back(parse_group(g));
      fcfg.propagation.validate();
      const auto r = ingest_cdr_file(ft_cdr, ft_opt);
      const auto bank = ft_bank.load(delim);
      std::vector<TimeframeBlocks> blocks;
      const auto cohorts = detect_cohorts(r.records, fcfg.window_months);
      for (std::size_t c = 0; c < cohorts.size(); ++c)
        blocks.push_back(featurize_timeframe(r.records, bank, cohorts[c], static_cast<int>(c) + 1, fcfg));
      AssembleStats as;
      auto m = assemble(blocks, &as);
      if (ft_corr > 0) m = drop_correlated(m, ft_corr);
      auto out = open_out(ft_out);
      write_feature_matrix(out, m);
      std::cout << "subjects " << m.rows() << " (dropped " << as.dropped_missing_group << " lacking a group), features "
                << m.cols() << "\n";
    } else if (*ns) {
      auto e = open_in(ns_graph + "_edges.csv");
      auto n = open_in(ns_graph + "_nodes.csv");
      const auto g = read_graph(e, n, GraphMode::undirected);
      auto lin = open_in(ns_labels);
      const auto t = csv::Table::read(lin, ns_labels);
      const auto c_id = t.column("phone_id"), c_l = t.column(ns_column);
      DefaultLabels labels(g.n_nodes());
      for (std::size_t r = 0; r < t.rows().size(); ++r) {
        const auto v = g.index().find(std::string(t.cell(r, c_id)));
        const auto cell = t.cell(r, c_l);
        if (!v || cell == "NA" || cell.empty()) continue;
        if (cell != "0" && cell != "1") throw RowError(t.line_number(r), "label must be 0, 1 or NA");
        labels[*v] = cell == "1";
      }
      const auto rep = homophily_test(g, labels);
      write_homophily_text(std::cout, rep);
      if (!ns_out.empty()) {
        auto out = open_out(ns_out);
        out << dump_json(homophily_json(rep));
      }
    } else if (*train) {
      const auto m = load_features(tr_features);
      const auto sp = split(m.y_default, {tr_fraction, substream_seed(tr_seed, "split"), true});
      const auto groups = model_groups(tr_id);
      const auto cols = m.columns_in(groups);
      const auto pr = correlation_pruning(m.select_columns(cols), tr_corr, sp.train);
      std::vector<std::string> names;
      for (auto k : pr.kept) names.push_back(m.feature_names[cols[k]]);
      auto d = model_data(m, names, sp.train);
      const auto keep = undersample(d.y, tr_ratio, substream_seed(tr_seed, "undersample"));
      std::vector<std::size_t> rows;
      for (auto k : keep) rows.push_back(d.rows[k]);
      d = model_data(m, names, rows);
      tcfg.kind = parse_classifier(tr_kind);
      tcfg.forest.seed = substream_seed(tr_seed, "forest");
      tcfg.tree.seed = substream_seed(tr_seed, "tree");
      tcfg.forest.threads = threads;
      const auto c = train_classifier(d.x, d.y, tcfg, names);
      {
        auto out = open_out(tr_out);
        out << classifier_to_json(c).dump() << "\n";
      }
      auto out = open_out(tr_split_out);
      out << "subject_id,timeframe,part\n";
      for (auto i : sp.train) out << csv::quote_if_needed(m.subject_ids[i]) << ',' << m.timeframe[i] << ",train\n";
      for (auto i : sp.test) out << csv::quote_if_needed(m.subject_ids[i]) << ',' << m.timeframe[i] << ",test\n";
      std::cout << "trained " << classifier_tag(c.kind()) << " on " << d.y.size() << " rows, " << names.size()
                << " features\n";
    } else if (*predict) {
      const auto m = load_features(pd_features);
      const auto c = classifier_from_json(nlohmann::json::parse(read_text_file(pd_model)));
      std::vector<std::size_t> rows;
      if (pd_split.empty()) {
        rows.resize(m.rows());
        std::iota(rows.begin(), rows.end(), 0);
      } else {
        rows = read_split(pd_split, m, pd_part);
      }
      const auto d = model_data(m, c.feature_names, rows);
      const auto s = c.predict(d.x);
      std::vector<ScoreRow> out;
      for (std::size_t k = 0; k < rows.size(); ++k) out.push_back({m.subject_ids[rows[k]], m.timeframe[rows[k]], d.y[k], s[k]});
      write_text_file(pd_out, format_scores(out));
      std::cout << "scored " << out.size() << " rows\n";
    } else if (*eval) {
      const auto rows = read_scores(ev_scores);
      const auto bank = ev_bank.load(delim);
      std::vector<std::string> ids;
      std::vector<double> s;
      std::vector<std::uint8_t> y;
      for (const auto& r : rows) {
        ids.push_back(r.subject_id);
        s.push_back(r.score);
        y.push_back(r.y);
      }
      const auto loans = loans_for_ids(ids, bank);
      resolve_emp(loans);
      const auto rep = evaluate_scores(s, y, loans, ep);
      nlohmann::ordered_json j{{"auc", rep.auc},
                               {"emp", rep.emp},
                               {"emp_fraction", rep.emp_fraction},
                               {"implied_cutoff", rep.implied_cutoff},
                               {"rejected", rep.rejected},
                               {"model_profit", format_cents(rep.model_profit)},
                               {"no_model_profit", format_cents(rep.no_model_profit)},
                               {"params", {{"roi", ep.roi}, {"lgd", ep.lgd}, {"p0", ep.p0}, {"p1", ep.p1}}}};
      std::cout << dump_json(j);
      if (!ev_out.empty()) write_text_file(ev_out, dump_json(j));
    } else if (*cmp) {
      std::vector<std::vector<ScoreRow>> all;
      for (const auto& f : cmp_scores) all.push_back(read_scores(f));
      for (const auto& a : all) {
        if (a.size() != all.front().size()) throw DataError("score files cover different instances");
        for (std::size_t i = 0; i < a.size(); ++i)
          if (a[i].subject_id != all.front()[i].subject_id || a[i].y != all.front()[i].y)
            throw DataError("score files are not aligned at row " + std::to_string(i + 2));
      }
      std::vector<std::uint8_t> y;
      for (const auto& r : all.front()) y.push_back(r.y);
      auto scores = [&](std::size_t k) {
        std::vector<double> s;
        for (const auto& r : all[k]) s.push_back(r.score);
        return s;
      };
      std::ostringstream out;
      out << "a,b,auc_a,auc_b,auc_diff,variance,z,p_value\n";
      for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = a + 1; b < all.size(); ++b) {
          const auto d = delong_test(scores(a), scores(b), y);
          out << cmp_scores[a] << ',' << cmp_scores[b] << ',' << d.auc_a << ',' << d.auc_b << ',' << d.auc_diff << ','
              << d.variance << ',' << d.z << ',' << d.p_value << '\n';
        }
      std::cout << out.str();
      if (!cmp_out.empty()) write_text_file(cmp_out, out.str());
    } else if (*sweep) {
      const auto rows = read_scores(sw_scores);
      std::vector<double> s;
      std::vector<std::uint8_t> y;
      std::vector<std::string> ids;
      for (const auto& r : rows) {
        s.push_back(r.score);
        y.push_back(r.y);
        ids.push_back(r.subject_id);
      }
      if (sw_bank.given()) resolve_emp(loans_for_ids(ids, sw_bank.load(delim)));
      else {
        if (p0_opt) ep.p0 = *p0_opt;
        if (p1_opt) ep.p1 = *p1_opt;
      }
      const auto which = sw_param == "roi" ? SweepParameter::roi
                         : sw_param == "lgd" ? SweepParameter::lgd
                                             : throw UsageError("param must be roi or lgd");
      const auto grid = parse_grid(sw_grid);
      std::ostringstream out;
      out << sw_param << ",emp,emp_fraction\n";
      for (const auto& r : sensitivity_sweep(s, y, ep, which, grid))
        out << csv::format_double(r.value) << ',' << csv::format_double(r.emp) << ','
            << csv::format_double(r.emp_fraction) << '\n';
      std::cout << out.str();
      if (!sw_out.empty()) write_text_file(sw_out, out.str());
    } else if (*imp) {
      const auto m = load_features(im_features);
      const auto c = classifier_from_json(nlohmann::json::parse(read_text_file(im_model)));
      const auto* f = c.forest();
      if (!f) throw UsageError("importance needs a forest model");
      const auto d = model_data(m, c.feature_names, read_split(im_split, m, "test"));
      std::vector<FeatureImportance> v;
      const char* col;
      if (im_kind == "profit") {
        if (!im_bank.given()) throw UsageError("profit importance needs --accounts, --transactions and --cards");
        std::vector<std::string> ids;
        for (auto r : d.rows) ids.push_back(m.subject_ids[r]);
        const auto loans = loans_for_ids(ids, im_bank.load(delim));
        resolve_emp(loans);
        v = profit_feature_importance(*f, f->predict_per_tree(d.x, threads), loans, ep);
        col = "mean_decrease_profit";
      } else if (im_kind == "accuracy") {
        const auto kind = im_variant == "permutation" ? AccuracyImportanceKind::permutation
                          : im_variant == "membership" ? AccuracyImportanceKind::membership
                                                       : throw UsageError("variant must be permutation or membership");
        v = accuracy_feature_importance(*f, d.x, d.y, im_seed, kind, threads);
        col = "mean_decrease_accuracy";
      } else {
        throw UsageError("kind must be profit or accuracy");
      }
      std::ostringstream out;
      out << "rank,feature," << col << "\n";
      for (std::size_t k = 0; k < v.size(); ++k)
        out << k + 1 << ',' << csv::quote_if_needed(c.feature_names[v[k].feature]) << ','
            << (v[k].value ? csv::format_double(*v[k].value) : std::string("NA")) << '\n';
      std::cout << out.str();
      if (!im_out.empty()) write_text_file(im_out, out.str());
    } else if (*run) {
      if (!run_data.empty()) {
        const SynthPaths p(run_data);
        ec.cdr = p.cdr;
        ec.accounts = p.accounts;
        ec.transactions = p.transactions;
        ec.cards = p.cards;
      }
      if (!run_cdr.empty()) ec.cdr = run_cdr;
      if (!run_bank.accounts.empty()) ec.accounts = run_bank.accounts;
      if (!run_bank.transactions.empty()) ec.transactions = run_bank.transactions;
      if (!run_bank.cards.empty()) ec.cards = run_bank.cards;
      ec.out_dir = run_out;
      ec.ingest.delimiter = delim;
      ec.train.kind = parse_classifier(run_classifier);
      ec.featurize.spa_energy = run_energy == "uniform" ? SeedEnergy::uniform
                                : run_energy == "severity" ? SeedEnergy::severity
                                                           : throw UsageError("energy must be uniform or severity");
      ec.roi_grid = roi_grid;
      ec.lgd_grid = lgd_grid;
      ec.importance = !no_importance;
      ec.save_models = !no_models;
      ec.threads = threads;
      if (p0_opt || p1_opt) {
        if (!p0_opt || !p1_opt) throw UsageError("give both --p0 and --p1, or neither");
        ec.emp.p0 = *p0_opt;
        ec.emp.p1 = *p1_opt;
        ec.estimate_lambda_masses = false;
      }
      ec.emp.roi = ep.roi;
      ec.emp.lgd = ep.lgd;
      const auto t0 = std::chrono::steady_clock::now();
      ec.log = [&](const std::string& s) {
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "[" << std::fixed << std::setprecision(1) << sec << "s] " << s << "\n";
      };
      run_pipeline(ec);
      std::cout << read_text_file(ec.out_dir / "report.txt");
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::usage);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::convergence);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data);
  }
  return 0;
}
