#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdrscore/call_graph.hpp"
#include "cdrscore/cdr_ingest.hpp"
#include "cdrscore/error.hpp"
#include "cdrscore/featurize.hpp"
#include "cdrscore/models.hpp"
#include "cdrscore/netstats.hpp"
#include "cdrscore/profit_eval.hpp"
#include "cdrscore/random.hpp"

namespace cdrscore {

namespace fs = std::filesystem;

// Feature groups of each model specification.
inline std::vector<FeatureGroup> model_groups(const std::string& id) {
  using G = FeatureGroup;
  if (id == "A") return {G::SD};
  if (id == "B") return {G::CB};
  if (id == "C") return {G::LB};
  if (id == "D") return {G::PR};
  if (id == "E") return {G::SPA};
  if (id == "F") return {G::SD, G::CB};
  if (id == "G") return {G::CB, G::LB, G::PR, G::SPA};
  if (id == "H") return {G::SD, G::CB, G::LB, G::PR, G::SPA};
  throw UsageError("unknown model id '" + id + "' (expected A-H)");
}

inline std::string groups_label(const std::vector<FeatureGroup>& gs) {
  std::string s;
  for (auto g : gs) s += (s.empty() ? "" : "+") + std::string(group_tag(g));
  return s;
}

struct ExperimentConfig {
  fs::path cdr, accounts, transactions, cards;
  fs::path out_dir = "out";
  CdrIngestOptions ingest;
  FeaturizeConfig featurize;
  double corr_threshold = 0.95;
  double train_fraction = 0.7;
  double undersample_ratio = 1.0;
  TrainConfig train;
  std::vector<std::string> models{"A", "B", "C", "D", "E", "F", "G", "H"};
  std::string importance_model = "H";
  bool importance = true;
  bool save_models = true;
  EmpParams emp;
  bool estimate_lambda_masses = true;
  std::vector<double> roi_grid{0.01, 0.02, 0.03, 0.04, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2};
  std::vector<double> lgd_grid{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint64_t seed = 42;
  int threads = 0;
  std::function<void(const std::string&)> log;

  void validate() const {
    for (const auto& [name, p] : {std::pair{"cdr", cdr}, {"accounts", accounts}, {"transactions", transactions},
                                  {"cards", cards}})
      if (p.empty() || !fs::exists(p)) throw DataError(std::string("missing ") + name + " input file: " + p.string());
    if (models.empty()) throw UsageError("no models selected");
    for (const auto& m : models) model_groups(m);
    if (!(corr_threshold > 0 && corr_threshold <= 1)) throw UsageError("correlation threshold must lie in (0,1]");
    emp.validate();
    featurize.propagation.validate();
  }
};

// A stage failure names the stage and keeps the original error category.
template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError("stage " + stage + ": " + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("stage " + stage + ": " + e.what(), e.iterations(), e.residual());
  } catch (const std::exception& e) {
    throw DataError("stage " + stage + ": " + e.what());
  }
}

// Card months whose three preceding months are fully covered by the call log.
inline std::vector<YearMonth> detect_cohorts(std::span<const CdrRecord> records, int window_months = 3) {
  if (records.empty()) throw DataError("no call records to derive cohorts from");
  auto [lo, hi] = std::minmax_element(records.begin(), records.end(), [](const CdrRecord& a, const CdrRecord& b) {
    return a.start_date < b.start_date;
  });
  const auto first = calendar::year_month_of(lo->start_date), last = calendar::year_month_of(hi->start_date);
  std::vector<YearMonth> out;
  for (auto m = calendar::add_months(first, window_months); m <= calendar::add_months(last, 1);
       m = calendar::add_months(m, 1))
    out.push_back(m);
  if (out.empty()) throw DataError("call log spans fewer than " + std::to_string(window_months) + " months");
  return out;
}

inline DefaultLabels default_labels(const NodeIndex& index, const BankData& bank) {
  DefaultLabels labels(index.size());
  for (const auto& r : bank.records)
    if (auto v = index.find(r.customer_id)) labels[*v] = r.is_default();
  return labels;
}

inline nlohmann::ordered_json homophily_json(const HomophilyReport& r) {
  nlohmann::ordered_json j{{"n_default", r.n_default},
                           {"n_nondefault", r.n_nondefault},
                           {"m_total", r.m_total},
                           {"m_cross", r.m_cross},
                           {"m_dyadic", r.m_dyadic},
                           {"m_nondefault", r.m_nondefault},
                           {"expected_cross_fraction", r.expected_cross_fraction},
                           {"observed_cross_fraction", r.observed_cross_fraction},
                           {"z", r.z_statistic},
                           {"p_value", r.p_value},
                           {"heterophilicity", r.heterophilicity},
                           {"heterophilic", r.heterophilic()},
                           {"dyadic", r.dyadic()}};
  if (r.dyadicity) j["dyadicity"] = *r.dyadicity;
  else j["dyadicity"] = nullptr;
  return j;
}

inline std::vector<LoanOutcome> loans_for(const FeatureMatrix& m, std::span<const std::size_t> rows,
                                          const BankData& bank) {
  std::vector<LoanOutcome> out;
  out.reserve(rows.size());
  for (auto i : rows) {
    const auto* r = bank.find(m.subject_ids[i]);
    if (!r) throw DataError("subject '" + m.subject_ids[i] + "' has no card record");
    out.push_back({r->credit_limit, r->exposure_at_default(), r->is_default()});
  }
  return out;
}

inline void write_text_file(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    out << content;
    if (!out) throw DataError("error writing " + p.string());
  }
  fs::rename(tmp, p);
}

inline std::string read_text_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct ScoreRow {
  std::string subject_id;
  int timeframe = 0;
  std::uint8_t y = 0;
  double score = 0;
};

inline std::string format_scores(const std::vector<ScoreRow>& rows) {
  std::ostringstream out;
  out << "subject_id,timeframe,y,score\n";
  for (const auto& r : rows)
    out << csv::quote_if_needed(r.subject_id) << ',' << r.timeframe << ',' << int(r.y) << ','
        << csv::format_double(r.score) << '\n';
  return out.str();
}

inline std::vector<ScoreRow> read_scores(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open scores file " + p.string());
  const auto t = csv::Table::read(in, p.string());
  const auto c_id = t.column("subject_id"), c_tf = t.column("timeframe"), c_y = t.column("y"),
             c_s = t.column("score");
  std::vector<ScoreRow> rows;
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto tf = csv::parse_int<int>(t.cell(r, c_tf));
    auto y = csv::parse_int<int>(t.cell(r, c_y));
    auto s = csv::parse_double(t.cell(r, c_s));
    if (!tf || !y || (*y != 0 && *y != 1) || !s) throw RowError(t.line_number(r), "malformed score row");
    rows.push_back({std::string(t.cell(r, c_id)), *tf, static_cast<std::uint8_t>(*y), *s});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Stage: features (ingest, graphs, propagation, feature extraction, netstats)

struct FeatureStage {
  FeatureMatrix matrix;
  nlohmann::ordered_json info;  // ingest counts, cohorts, netstats
};

inline FeatureStage build_features(const ExperimentConfig& cfg, const BankData& bank) {
  const auto log = [&](const std::string& s) {
    if (cfg.log) cfg.log(s);
  };
  const fs::path features_csv = cfg.out_dir / "features.csv", info_json = cfg.out_dir / "stage_features.json";
  if (!fs::exists(features_csv) || !fs::exists(info_json)) {
    log("ingesting call records from " + cfg.cdr.string());
    auto ingest = run_stage("ingest", [&] { return ingest_cdr_file(cfg.cdr.string(), cfg.ingest); });
    {
      std::ostringstream rej;
      write_rejection_log(rej, ingest.rejections);
      write_text_file(cfg.out_dir / "rejections.log", rej.str());
    }
    nlohmann::ordered_json info;
    info["ingest"] = {{"rows_read", ingest.stats.rows_read},
                      {"rows_rejected", ingest.stats.rows_rejected},
                      {"rows_filtered_short", ingest.stats.rows_filtered_short},
                      {"rows_accepted", ingest.stats.rows_accepted()},
                      {"distinct_ids", ingest.stats.distinct_ids}};
    info["bank"] = {{"accounts", bank.stats.accounts},
                    {"card_rows", bank.stats.card_rows},
                    {"transactions", bank.stats.transactions},
                    {"orphan_transactions", bank.stats.orphan_transactions},
                    {"orphan_cards", bank.stats.orphan_cards},
                    {"excluded_no_card", bank.stats.excluded_no_card}};
    const auto cohorts = detect_cohorts(ingest.records, cfg.featurize.window_months);
    std::vector<TimeframeBlocks> blocks;
    nlohmann::ordered_json cohort_info = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < cohorts.size(); ++c) {
      const int tf = static_cast<int>(c) + 1;
      log("timeframe t" + std::to_string(tf) + ": card month " + calendar::format_year_month(cohorts[c]));
      auto graphs = run_stage("build-graph", [&] {
        return build_timeframe_graphs(ingest.records, bank, cohorts[c], tf, cfg.featurize);
      });
      auto block = run_stage("featurize", [&] {
        return featurize_timeframe(ingest.records, bank, cohorts[c], tf, cfg.featurize, &graphs);
      });
      nlohmann::ordered_json ci{{"timeframe", tf},
                                {"card_month", calendar::format_year_month(cohorts[c])},
                                {"subjects", block.targets.size()}};
      std::size_t defaults = 0;
      for (const auto& [id, y] : block.targets) defaults += y;
      ci["subject_defaults"] = defaults;
      for (std::size_t m = 0; m < 3; ++m)
        ci["graph_" + std::string(mode_tag(kGraphModes[m]))] = {{"nodes", graphs.by_mode[m].n_nodes()},
                                                                 {"edges", graphs.by_mode[m].n_edges()}};
      std::size_t level3 = 0;
      for (std::size_t v = 0; v < graphs.labels.size(); ++v) level3 += graphs.labels.delinquency[v] >= 3;
      ci["delinquent_3plus_nodes"] = level3;
      try {
        ci["netstats"] = homophily_json(homophily_test(graphs.by_mode[2], default_labels(graphs.by_mode[2].index(), bank)));
      } catch (const DataError& e) {
        ci["netstats"] = {{"error", e.what()}};
      }
      cohort_info.push_back(std::move(ci));
      blocks.push_back(std::move(block));
    }
    AssembleStats as;
    auto matrix = run_stage("assemble", [&] { return assemble(blocks, &as); });
    info["cohorts"] = std::move(cohort_info);
    info["assemble"] = {{"subjects_in", as.subjects_in}, {"dropped_missing_group", as.dropped_missing_group}};
    std::ostringstream fm;
    write_feature_matrix(fm, matrix);
    write_text_file(features_csv, fm.str());
    write_text_file(info_json, info.dump(2) + "\n");
  } else {
    log("reusing " + features_csv.string());
  }
  FeatureStage st;
  std::ifstream in(features_csv);
  st.matrix = run_stage("features", [&] { return read_feature_matrix(in); });
  st.info = nlohmann::ordered_json::parse(read_text_file(info_json));
  return st;
}

// ---------------------------------------------------------------------------
// Stage: one model specification

struct ModelResult {
  std::string id;
  std::vector<FeatureGroup> groups;
  std::vector<std::size_t> columns;  // into the full feature matrix, after pruning
  Classifier classifier;
  std::vector<double> test_scores;
  EmpReport report;
  std::size_t train_rows = 0;
};

inline ModelResult run_model(const ExperimentConfig& cfg, const std::string& id, const FeatureMatrix& m,
                             const SplitIndices& split, std::span<const std::uint8_t> y_test,
                             std::span<const LoanOutcome> test_loans, const EmpParams& emp_params) {
  ModelResult r;
  r.id = id;
  r.groups = model_groups(id);
  const fs::path scores_csv = cfg.out_dir / ("scores_" + id + ".csv");
  const fs::path model_json = cfg.out_dir / ("model_" + id + ".json");

  const auto group_cols = m.columns_in(r.groups);
  if (group_cols.empty()) throw DataError("model " + id + ": no features in groups " + groups_label(r.groups));
  const auto sub = m.select_columns(group_cols);
  const auto pruning = correlation_pruning(sub, cfg.corr_threshold, split.train);
  for (auto k : pruning.kept) r.columns.push_back(group_cols[k]);
  std::vector<std::string> names;
  for (auto c : r.columns) names.push_back(m.feature_names[c]);

  auto xcols = [&](std::span<const std::size_t> rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(r.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < r.columns.size(); ++j)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            m.values(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(r.columns[j]));
    return x;
  };

  const bool cached = fs::exists(scores_csv) && (!cfg.save_models || fs::exists(model_json));
  if (cached && cfg.save_models) {
    r.classifier = classifier_from_json(nlohmann::json::parse(read_text_file(model_json)));
    if (r.classifier.feature_names != names) throw DataError("cached model " + id + " does not match the features");
    for (const auto& s : read_scores(scores_csv)) r.test_scores.push_back(s.score);
    if (r.test_scores.size() != split.test.size()) throw DataError("cached scores for model " + id + " are stale");
  } else {
    std::vector<std::uint8_t> y_train;
    for (auto i : split.train) y_train.push_back(m.y_default[i]);
    const auto keep = undersample(y_train, cfg.undersample_ratio, substream_seed(cfg.seed, "undersample"));
    std::vector<std::size_t> rows;
    std::vector<std::uint8_t> y;
    for (auto k : keep) {
      rows.push_back(split.train[k]);
      y.push_back(y_train[k]);
    }
    auto tc = cfg.train;
    tc.forest.seed = substream_seed(cfg.seed, "forest");
    tc.tree.seed = substream_seed(cfg.seed, "tree");
    tc.forest.threads = cfg.threads;
    r.classifier = train_classifier(xcols(rows), y, tc, names);
    r.test_scores = r.classifier.predict(xcols(split.test));
    std::vector<ScoreRow> out;
    for (std::size_t k = 0; k < split.test.size(); ++k) {
      const auto i = split.test[k];
      out.push_back({m.subject_ids[i], m.timeframe[i], m.y_default[i], r.test_scores[k]});
    }
    if (cfg.save_models) write_text_file(model_json, classifier_to_json(r.classifier).dump() + "\n");
    write_text_file(scores_csv, format_scores(out));
  }
  r.train_rows = split.train.size();
  r.report = evaluate_scores(r.test_scores, y_test, test_loans, emp_params);
  return r;
}

// ---------------------------------------------------------------------------
// Report formatting

inline std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

struct PipelineResult {
  nlohmann::ordered_json report;
  std::vector<ModelResult> models;
};

inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto log = [&](const std::string& s) {
    if (cfg.log) cfg.log(s);
  };
  log("reading bank data");
  const auto bank = run_stage("ingest", [&] {
    return ingest_bank_files(cfg.accounts.string(), cfg.transactions.string(), cfg.cards.string(),
                             cfg.ingest.delimiter);
  });
  auto features = build_features(cfg, bank);
  const auto& m = features.matrix;
  if (m.rows() == 0) throw DataError("no subjects left after feature extraction");

  const auto split_idx = run_stage("split", [&] {
    return split(m.y_default, {cfg.train_fraction, substream_seed(cfg.seed, "split"), true});
  });
  std::vector<std::uint8_t> y_test;
  for (auto i : split_idx.test) y_test.push_back(m.y_default[i]);
  const auto test_loans = loans_for(m, split_idx.test, bank);
  EmpParams emp_params = cfg.emp;
  if (cfg.estimate_lambda_masses) {
    const auto train_loans = loans_for(m, split_idx.train, bank);
    std::tie(emp_params.p0, emp_params.p1) = estimate_lambda_masses(train_loans);
  }

  PipelineResult res;
  auto& rep = res.report;
  rep["data"] = features.info;
  std::size_t defaults = 0;
  for (auto y : m.y_default) defaults += y;
  rep["dataset"] = {{"rows", m.rows()},
                    {"features", m.cols()},
                    {"default_rate", double(defaults) / double(m.rows())},
                    {"train_rows", split_idx.train.size()},
                    {"test_rows", split_idx.test.size()},
                    {"test_defaults", count_positive(y_test)}};
  std::map<std::string, std::size_t> per_group;
  for (auto g : m.groups) ++per_group[std::string(group_tag(g))];
  for (auto g : kFeatureGroups) rep["dataset"]["group_sizes"][std::string(group_tag(g))] = per_group[std::string(group_tag(g))];
  rep["emp_params"] = {{"roi", emp_params.roi}, {"lgd", emp_params.lgd}, {"p0", emp_params.p0}, {"p1", emp_params.p1}};
  rep["classifier"] = classifier_tag(cfg.train.kind);

  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& id : cfg.models) {
    log("model " + id + " (" + groups_label(model_groups(id)) + ")");
    auto r = run_stage("model " + id, [&] { return run_model(cfg, id, m, split_idx, y_test, test_loans, emp_params); });
    models.push_back({{"id", id},
                      {"groups", groups_label(r.groups)},
                      {"features", r.columns.size()},
                      {"auc", r.report.auc},
                      {"emp", r.report.emp},
                      {"emp_fraction", r.report.emp_fraction},
                      {"cutoff", r.report.implied_cutoff},
                      {"rejected", r.report.rejected},
                      {"model_profit", format_cents(r.report.model_profit)},
                      {"no_model_profit", format_cents(r.report.no_model_profit)}});
    res.models.push_back(std::move(r));
  }
  rep["models"] = std::move(models);

  // pairwise DeLong
  nlohmann::ordered_json delong = nlohmann::ordered_json::array();
  std::ostringstream delong_csv;
  delong_csv << "model_a,model_b,auc_a,auc_b,auc_diff,variance,z,p_value\n";
  for (std::size_t a = 0; a < res.models.size(); ++a)
    for (std::size_t b = a + 1; b < res.models.size(); ++b) {
      const auto d = delong_test(res.models[a].test_scores, res.models[b].test_scores, y_test);
      delong.push_back({{"a", res.models[a].id}, {"b", res.models[b].id}, {"auc_diff", d.auc_diff},
                        {"z", d.z}, {"p_value", d.p_value}});
      delong_csv << res.models[a].id << ',' << res.models[b].id << ',' << csv::format_double(d.auc_a) << ','
                 << csv::format_double(d.auc_b) << ',' << csv::format_double(d.auc_diff) << ','
                 << csv::format_double(d.variance) << ',' << csv::format_double(d.z) << ','
                 << csv::format_double(d.p_value) << '\n';
    }
  rep["delong"] = std::move(delong);
  write_text_file(cfg.out_dir / "delong.csv", delong_csv.str());

  {
    std::ostringstream mc;
    mc << "model,groups,features,auc,emp,emp_fraction,cutoff,rejected,model_profit,no_model_profit\n";
    for (const auto& r : res.models)
      mc << r.id << ',' << groups_label(r.groups) << ',' << r.columns.size() << ',' << csv::format_double(r.report.auc)
         << ',' << csv::format_double(r.report.emp) << ',' << csv::format_double(r.report.emp_fraction) << ','
         << csv::format_double(r.report.implied_cutoff) << ',' << r.report.rejected << ','
         << format_cents(r.report.model_profit) << ',' << format_cents(r.report.no_model_profit) << '\n';
    write_text_file(cfg.out_dir / "models.csv", mc.str());
  }
  {
    std::vector<double> auc, empv;
    for (const auto& r : res.models) {
      auc.push_back(r.report.auc);
      empv.push_back(r.report.emp);
    }
    if (auc.size() >= 2) {
      const auto rc = rank_correlations(auc, empv);
      rep["auc_emp_rank_agreement"] = {{"spearman", rc.spearman}, {"kendall_tau_b", rc.kendall_tau_b},
                                       {"goodman_kruskal_gamma", rc.goodman_kruskal_gamma}};
    }
  }

  // importance on the chosen model
  auto imp_it = std::find_if(res.models.begin(), res.models.end(),
                             [&](const ModelResult& r) { return r.id == cfg.importance_model; });
  if (cfg.importance && imp_it != res.models.end() && imp_it->classifier.forest()) {
    log("feature importance on model " + imp_it->id);
    const auto& f = *imp_it->classifier.forest();
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(split_idx.test.size()), static_cast<Eigen::Index>(imp_it->columns.size()));
    for (std::size_t i = 0; i < split_idx.test.size(); ++i)
      for (std::size_t j = 0; j < imp_it->columns.size(); ++j)
        xt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            m.values(static_cast<Eigen::Index>(split_idx.test[i]), static_cast<Eigen::Index>(imp_it->columns[j]));
    const auto votes = f.predict_per_tree(xt, cfg.threads);
    const auto profit = profit_feature_importance(f, votes, test_loans, emp_params);
    const auto accuracy = accuracy_feature_importance(f, xt, y_test, substream_seed(cfg.seed, "importance"),
                                                      AccuracyImportanceKind::permutation, cfg.threads);
    const auto& names = imp_it->classifier.feature_names;
    auto write_imp = [&](const std::string& file, const std::vector<FeatureImportance>& v, const char* col) {
      std::ostringstream s;
      s << "rank,feature,group," << col << "\n";
      for (std::size_t k = 0; k < v.size(); ++k)
        s << k + 1 << ',' << csv::quote_if_needed(names[v[k].feature]) << ','
          << group_tag(m.groups[imp_it->columns[v[k].feature]]) << ','
          << (v[k].value ? csv::format_double(*v[k].value) : std::string("NA")) << '\n';
      write_text_file(cfg.out_dir / file, s.str());
    };
    write_imp("importance_profit.csv", profit, "mean_decrease_profit");
    write_imp("importance_accuracy.csv", accuracy, "mean_decrease_accuracy");
    auto top = [&](const std::vector<FeatureImportance>& v) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < std::min<std::size_t>(10, v.size()); ++k)
        a.push_back({{"feature", names[v[k].feature]}, {"value", v[k].value ? nlohmann::ordered_json(*v[k].value) : nlohmann::ordered_json()}});
      return a;
    };
    rep["importance"]["model"] = imp_it->id;
    rep["importance"]["profit_top10"] = top(profit);
    rep["importance"]["accuracy_top10"] = top(accuracy);
    // agreement over features with a defined profit importance
    std::vector<double> pv(f.n_features), av(f.n_features);
    std::vector<std::uint8_t> defined(f.n_features, 0);
    for (const auto& e : profit)
      if (e.value) {
        pv[e.feature] = *e.value;
        defined[e.feature] = 1;
      }
    for (const auto& e : accuracy) av[e.feature] = e.value.value_or(0.0);
    std::vector<double> a, b;
    for (std::size_t j = 0; j < f.n_features; ++j)
      if (defined[j]) {
        a.push_back(pv[j]);
        b.push_back(av[j]);
      }
    if (a.size() >= 2) {
      const auto rc = rank_correlations(a, b);
      rep["importance"]["rank_agreement"] = {{"features", a.size()}, {"spearman", rc.spearman},
                                             {"kendall_tau_b", rc.kendall_tau_b},
                                             {"goodman_kruskal_gamma", rc.goodman_kruskal_gamma}};
    }
  }

  // sensitivity sweeps on the last model's scores (the full specification by default)
  const auto& sweep_model = imp_it != res.models.end() ? *imp_it : res.models.back();
  auto write_sweep = [&](const std::string& file, SweepParameter which, const std::vector<double>& grid) {
    const auto rows = sensitivity_sweep(sweep_model.test_scores, y_test, emp_params, which, grid);
    std::ostringstream s;
    s << (which == SweepParameter::roi ? "roi" : "lgd") << ",emp,emp_fraction\n";
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      s << csv::format_double(r.value) << ',' << csv::format_double(r.emp) << ',' << csv::format_double(r.emp_fraction)
        << '\n';
      j.push_back({{"value", r.value}, {"emp", r.emp}, {"emp_fraction", r.emp_fraction}});
    }
    write_text_file(cfg.out_dir / file, s.str());
    return j;
  };
  rep["sweeps"]["model"] = sweep_model.id;
  if (!cfg.roi_grid.empty()) rep["sweeps"]["roi"] = write_sweep("sweep_roi.csv", SweepParameter::roi, cfg.roi_grid);
  if (!cfg.lgd_grid.empty()) rep["sweeps"]["lgd"] = write_sweep("sweep_lgd.csv", SweepParameter::lgd, cfg.lgd_grid);

  // human-readable summary
  std::ostringstream txt;
  txt << "dataset: " << m.rows() << " subjects, " << m.cols() << " features, default rate "
      << fixed(double(defaults) / double(m.rows()), 4) << "\n";
  txt << "test set: " << split_idx.test.size() << " subjects, " << count_positive(y_test) << " defaulters\n";
  txt << "EMP parameters: ROI " << emp_params.roi << ", LGD " << emp_params.lgd << ", p0 " << fixed(emp_params.p0, 4)
      << ", p1 " << fixed(emp_params.p1, 4) << "\n\n";
  txt << std::left << std::setw(6) << "model" << std::setw(22) << "groups" << std::right << std::setw(9) << "features"
      << std::setw(9) << "AUC" << std::setw(10) << "EMP" << std::setw(9) << "eta" << std::setw(10) << "cutoff"
      << std::setw(15) << "profit" << "\n";
  for (const auto& r : res.models)
    txt << std::left << std::setw(6) << r.id << std::setw(22) << groups_label(r.groups) << std::right << std::setw(9)
        << r.columns.size() << std::setw(9) << fixed(r.report.auc, 4) << std::setw(10) << fixed(r.report.emp, 5)
        << std::setw(9) << fixed(r.report.emp_fraction, 4) << std::setw(10) << fixed(r.report.implied_cutoff, 4)
        << std::setw(15) << format_cents(r.report.model_profit) << "\n";
  if (!res.models.empty())
    txt << "profit without a model: " << format_cents(res.models.front().report.no_model_profit) << "\n";
  txt << "\nDeLong pairwise comparisons (p < 0.05 marked *)\n";
  for (const auto& d : rep["delong"])
    txt << "  " << d["a"].get<std::string>() << " vs " << d["b"].get<std::string>() << "  diff "
        << std::setw(8) << fixed(d["auc_diff"].get<double>(), 4) << "  p " << fixed(d["p_value"].get<double>(), 4)
        << (d["p_value"].get<double>() < 0.05 ? " *" : "") << "\n";
  for (const auto& c : rep["data"]["cohorts"]) {
    txt << "\ntimeframe t" << c["timeframe"].get<int>() << " (card month " << c["card_month"].get<std::string>()
        << "): " << c["subjects"].get<std::size_t>() << " subjects\n";
    const auto& ns = c["netstats"];
    if (ns.contains("error")) {
      txt << "  homophily: " << ns["error"].get<std::string>() << "\n";
    } else {
      txt << "  homophily: z " << fixed(ns["z"].get<double>(), 3) << ", p " << fixed(ns["p_value"].get<double>(), 4)
          << ", D " << (ns["dyadicity"].is_null() ? std::string("NA") : fixed(ns["dyadicity"].get<double>(), 4))
          << ", H " << fixed(ns["heterophilicity"].get<double>(), 4) << (ns["dyadic"].get<bool>() ? " dyadic" : " not dyadic")
          << (ns["heterophilic"].get<bool>() ? ", heterophilic" : ", not heterophilic") << "\n";
    }
  }
  write_text_file(cfg.out_dir / "report.txt", txt.str());
  write_text_file(cfg.out_dir / "report.json", rep.dump(2) + "\n");
  return res;
}

}  // namespace cdrscore
