#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cdrscore/calendar.hpp"
#include "cdrscore/call_graph.hpp"
#include "cdrscore/cdr_ingest.hpp"
#include "cdrscore/csv.hpp"
#include "cdrscore/error.hpp"
#include "cdrscore/propagation.hpp"

namespace cdrscore {

enum class FeatureGroup { SD, CB, LB, PR, SPA };

inline constexpr std::array<FeatureGroup, 5> kFeatureGroups = {FeatureGroup::SD, FeatureGroup::CB, FeatureGroup::LB,
                                                               FeatureGroup::PR, FeatureGroup::SPA};

inline std::string_view group_tag(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::SD: return "SD";
    case FeatureGroup::CB: return "CB";
    case FeatureGroup::LB: return "LB";
    case FeatureGroup::PR: return "PR";
    case FeatureGroup::SPA: return "SPA";
  }
  return "?";
}

inline FeatureGroup parse_group(std::string_view s) {
  std::string u(s);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto g : kFeatureGroups)
    if (group_tag(g) == u) return g;
  throw UsageError("unknown feature group '" + std::string(s) + "'");
}

// Sentinel for a mode-link feature when no neighbor carries a label.
inline constexpr double kNoInformation = -1.0;

// One subject's values for one feature group; missing entries hold 0.
struct FeatureRow {
  std::vector<double> values;
  std::vector<std::uint8_t> missing;

  explicit FeatureRow(std::size_t n = 0) : values(n, 0.0), missing(n, 0) {}
  void set_missing(std::size_t i) {
    values[i] = 0.0;
    missing[i] = 1;
  }
};

// ---------------------------------------------------------------------------
// Calling behavior: {count, duration} x {IN, OUT, UD} x 12 time slices

struct DayBoundary {
  int day_start_hour = 8;    // day is [day_start, night_start)
  int night_start_hour = 20;

  bool is_day(TimeOfDay t) const { return t.hour() >= day_start_hour && t.hour() < night_start_hour; }
};

namespace cb {
inline constexpr int kSlices = 12;  // Total, Day, Night, Monday..Sunday, Weekday, Weekend
inline constexpr int kFeatures = 3 * 2 * kSlices;

inline std::string slice_name(int s) {
  if (s == 0) return "";
  if (s == 1) return "Day";
  if (s == 2) return "Night";
  if (s < 10) return std::string(calendar::kWeekdayNames[s - 3]);
  return s == 10 ? "Weekday" : "Weekend";
}

// direction: 0 IN, 1 OUT, 2 UD; kind: 0 count, 1 duration
constexpr int index(int direction, int kind, int slice) { return (direction * 2 + kind) * kSlices + slice; }
}  // namespace cb

inline std::vector<std::string> calling_behavior_names() {
  static const char* kDir[] = {"IN", "OUT", "UD"};
  static const char* kKind[] = {"Count", "Duration"};
  std::vector<std::string> names(cb::kFeatures);
  for (int d = 0; d < 3; ++d)
    for (int k = 0; k < 2; ++k)
      for (int s = 0; s < cb::kSlices; ++s) {
        const auto slice = cb::slice_name(s);
        names[cb::index(d, k, s)] = (slice.empty() ? "" : slice + " ") + kKind[k] + " " + kDir[d];
      }
  return names;
}

// Accumulates calling behavior for many subjects in one pass over the records.
class CallingBehaviorAccumulator {
 public:
  CallingBehaviorAccumulator(const std::vector<std::string>& subjects, DateRange window, DayBoundary day = {})
      : window_(window), day_(day), totals_(subjects.size(), std::vector<double>(cb::kFeatures, 0.0)) {
    for (std::size_t i = 0; i < subjects.size(); ++i) slot_.emplace(subjects[i], i);
  }

  void add(const CdrRecord& r) {
    if (!window_.contains(r.start_date)) return;
    const int weekday = calendar::weekday_index(r.start_date);
    const int slices[] = {0, day_.is_day(r.start_time) ? 1 : 2, 3 + weekday, weekday >= 5 ? 11 : 10};
    auto credit = [&](const std::string& id, int direction) {
      auto it = slot_.find(id);
      if (it == slot_.end()) return;
      auto& t = totals_[it->second];
      for (int s : slices)
        for (int d : {direction, 2}) {
          t[cb::index(d, 0, s)] += 1;
          t[cb::index(d, 1, s)] += static_cast<double>(r.duration);
        }
    };
    credit(r.from_id, 1);
    credit(r.to_id, 0);
  }

  const std::vector<double>& features(std::size_t subject) const { return totals_.at(subject); }

 private:
  DateRange window_;
  DayBoundary day_;
  std::unordered_map<std::string, std::size_t> slot_;
  std::vector<std::vector<double>> totals_;
};

inline std::vector<double> calling_behavior_features(std::span<const CdrRecord> records, const std::string& subject,
                                                     DateRange window, DayBoundary day = {}) {
  CallingBehaviorAccumulator acc({subject}, window, day);
  for (const auto& r : records) acc.add(r);
  return acc.features(0);
}

// ---------------------------------------------------------------------------
// Link-based features over delinquency classes 0..3, per graph mode:
// Binary (c), Count (c), Mode, Count Labeled, Count Unlabeled, Weight Delinquent.

namespace lb {
inline constexpr int kPerMode = 12;
}

inline std::vector<std::string> link_based_names(GraphMode mode) {
  const std::string m(mode_tag(mode));
  std::vector<std::string> names;
  for (int c = 0; c < 4; ++c) names.push_back("Binary (" + std::to_string(c) + ") " + m);
  for (int c = 0; c < 4; ++c) names.push_back("Count (" + std::to_string(c) + ") " + m);
  names.push_back("Mode " + m);
  names.push_back("Count Labeled " + m);
  names.push_back("Count Unlabeled " + m);
  names.push_back("Weight Delinquent " + m);
  return names;
}

inline std::array<double, lb::kPerMode> link_based_features(const CallGraph& g, const NodeLabelSet& labels,
                                                            NodeId subject) {
  std::array<double, lb::kPerMode> f{};
  std::array<int, 4> counts{};
  int unlabeled = 0;
  double delinquent_weight = 0;
  auto nb = g.neighbors(subject);
  for (std::size_t k = 0; k < nb.size(); ++k) {
    auto level = labels.level(nb.ids[k]);
    if (!level) {
      ++unlabeled;
      continue;
    }
    ++counts[*level];
    if (*level >= 1) delinquent_weight += nb.weights[k];
  }
  int labeled = 0, mode = -1;
  for (int c = 0; c < 4; ++c) {
    f[c] = counts[c] > 0 ? 1.0 : 0.0;
    f[4 + c] = counts[c];
    labeled += counts[c];
    if (counts[c] > 0 && (mode < 0 || counts[c] > counts[mode])) mode = c;
  }
  f[8] = mode < 0 ? kNoInformation : mode;
  f[9] = labeled;
  f[10] = unlabeled;
  f[11] = delinquent_weight;
  return f;
}

// ---------------------------------------------------------------------------
// Exposure features per (method, seed criterion, mode): own score plus
// link-based features over the high/low-risk relabeling.

namespace expo {
inline constexpr int kPerRun = 6;
inline constexpr int kPerMethod = kPerRun * 9;
}  // namespace expo

inline std::vector<std::string> exposure_link_names(PropagationMethod method, SeedCriterion seeds, GraphMode mode) {
  const std::string p = method == PropagationMethod::pagerank ? "PR " : "SPA ";
  const std::string s = " (" + std::to_string(static_cast<int>(seeds)) + ") " + std::string(mode_tag(mode));
  return {p + "Exposure" + s,        p + "Binary High Risk" + s, p + "Binary Low Risk" + s,
          p + "Count High Risk" + s, p + "Count Low Risk" + s,   p + "Mode Risk" + s};
}

inline std::array<double, expo::kPerRun> exposure_link_features(const CallGraph& g, const ExposureVector& exposure,
                                                                const RiskRelabeling& relabeling, NodeId subject) {
  int high = 0, low = 0;
  for (NodeId v : g.neighbors(subject).ids) (relabeling.high_risk[v] ? high : low) += 1;
  const double mode = high + low == 0 ? kNoInformation : (high > low ? 1.0 : 0.0);
  return {exposure.scores.at(subject), high > 0 ? 1.0 : 0.0, low > 0 ? 1.0 : 0.0,
          static_cast<double>(high),   static_cast<double>(low), mode};
}

// ---------------------------------------------------------------------------
// Temporal-behavioral spending features over 7 weekday bins

enum class BinBasis { number, value };
enum class BinScope { non_empty, all };

struct WeekdayBins {
  std::array<double, 7> number{};
  std::array<double, 7> value{};

  static WeekdayBins from(std::span<const DebitTransaction> txs) {
    WeekdayBins b;
    for (const auto& t : txs) {
      const int w = calendar::weekday_index(t.date);
      b.number[w] += 1;
      b.value[w] += t.amount;
    }
    return b;
  }
  const std::array<double, 7>& get(BinBasis basis) const { return basis == BinBasis::number ? number : value; }
};

// Normalized entropy of the bin fractions. M is the number of non-empty bins
// (non_empty) or 7 (all). A single occupied bin gives 0.
inline std::optional<double> diversity(const std::array<double, 7>& bins, BinScope scope) {
  double total = 0;
  int occupied = 0;
  for (double x : bins) {
    if (x < 0) throw DataError("bin mass must be non-negative");
    total += x;
    occupied += x > 0;
  }
  if (!(total > 0)) return std::nullopt;
  const int m = scope == BinScope::all ? 7 : occupied;
  if (m <= 1 || occupied <= 1) return 0.0;
  double h = 0;
  for (double x : bins)
    if (x > 0) {
      const double p = x / total;
      h -= p * std::log(p);
    }
  return std::clamp(h / std::log(static_cast<double>(m)), 0.0, 1.0);
}

// Fraction of mass in the k most used bins (ties broken by bin index).
inline std::optional<double> loyalty(const std::array<double, 7>& bins, int k = 3) {
  if (k < 1 || k > 7) throw UsageError("loyalty k must be in 1..7");
  double total = 0;
  for (double x : bins) total += x;
  if (!(total > 0)) return std::nullopt;
  std::array<int, 7> order{0, 1, 2, 3, 4, 5, 6};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return bins[a] > bins[b]; });
  double top = 0;
  for (int i = 0; i < k; ++i) top += bins[order[i]];
  return std::min(1.0, top / total);
}

// ---------------------------------------------------------------------------
// Sociodemographic and spending features (35)

namespace sd {
inline constexpr std::array<std::string_view, 4> kMarital = {"single", "married", "divorced", "widowed"};
inline constexpr int kFeatures = 35;
}  // namespace sd

inline std::vector<std::string> sociodemographic_names() {
  std::vector<std::string> n = {"Age"};
  for (auto m : sd::kMarital) {
    std::string s(m);
    s[0] = static_cast<char>(std::toupper(s[0]));
    n.push_back("Marital " + s);
  }
  for (int r = 0; r < 10; ++r) n.push_back("Postcode Region " + std::to_string(r));
  for (const char* s : {"Amount Spent", "Mean Spent p. Day", "Number of Purchases", "Mean Purchase Value",
                        "Max Purchase Value", "Weekend Share Value", "Active Days", "Diversity-NE Value",
                        "Diversity-NE Number", "Diversity-ALL Value", "Diversity-ALL Number", "Loyalty-Value",
                        "Loyalty-Number"})
    n.emplace_back(s);
  for (auto d : calendar::kWeekdayNames) n.push_back("Spent " + std::string(d));
  return n;
}

// Debit activity inside `window` (the month before card issue) drives the
// spending features; `loyalty_k` is the number of top bins.
inline FeatureRow sociodemographic_features(const BankRecord& bank, const DateRange& window, int loyalty_k = 3) {
  FeatureRow row(sd::kFeatures);
  auto& v = row.values;
  const auto& socio = bank.sociodemographics;
  if (socio.age) v[0] = *socio.age;
  else row.set_missing(0);

  if (socio.marital_status) {
    std::string m = *socio.marital_status;
    for (auto& c : m) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (std::size_t i = 0; i < sd::kMarital.size(); ++i) v[1 + i] = m == sd::kMarital[i] ? 1.0 : 0.0;
  } else {
    for (int i = 1; i <= 4; ++i) row.set_missing(i);
  }
  if (socio.postcode && !socio.postcode->empty() && std::isdigit(static_cast<unsigned char>(socio.postcode->front()))) {
    v[5 + (socio.postcode->front() - '0')] = 1.0;
  } else {
    for (int i = 5; i < 15; ++i) row.set_missing(i);
  }

  std::vector<DebitTransaction> txs;
  for (const auto& t : bank.debit_transactions)
    if (window.contains(t.date)) txs.push_back(t);
  const auto bins = WeekdayBins::from(txs);
  double amount = 0, max_tx = 0, weekend = 0;
  std::set<Date> days;
  for (const auto& t : txs) {
    amount += t.amount;
    max_tx = std::max(max_tx, t.amount);
    if (calendar::is_weekend(t.date)) weekend += t.amount;
    days.insert(t.date);
  }
  const double span_days = static_cast<double>((window.last - window.first).count() + 1);
  v[15] = amount;
  v[16] = amount / span_days;
  v[17] = static_cast<double>(txs.size());
  v[18] = txs.empty() ? 0.0 : amount / static_cast<double>(txs.size());
  v[19] = max_tx;
  v[20] = amount > 0 ? weekend / amount : 0.0;
  v[21] = static_cast<double>(days.size());
  const std::optional<double> derived[] = {
      diversity(bins.value, BinScope::non_empty), diversity(bins.number, BinScope::non_empty),
      diversity(bins.value, BinScope::all),       diversity(bins.number, BinScope::all),
      loyalty(bins.value, loyalty_k),             loyalty(bins.number, loyalty_k)};
  for (int i = 0; i < 6; ++i) {
    if (derived[i]) v[22 + i] = *derived[i];
    else row.set_missing(22 + i);
  }
  for (int d = 0; d < 7; ++d) v[28 + d] = bins.value[d];
  return row;
}

// ---------------------------------------------------------------------------
// Feature matrix

struct FeatureMatrix {
  std::vector<std::string> subject_ids;
  std::vector<int> timeframe;
  std::vector<std::string> feature_names;
  std::vector<FeatureGroup> groups;
  Eigen::MatrixXd values;  // subjects x features, zero where missing
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing;
  std::vector<std::uint8_t> y_default;

  std::size_t rows() const { return subject_ids.size(); }
  std::size_t cols() const { return feature_names.size(); }

  std::vector<std::size_t> columns_in(std::span<const FeatureGroup> wanted) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < cols(); ++j)
      if (std::find(wanted.begin(), wanted.end(), groups[j]) != wanted.end()) out.push_back(j);
    return out;
  }

  std::optional<std::size_t> column(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - feature_names.begin());
  }

  FeatureMatrix select_columns(std::span<const std::size_t> cols_) const {
    FeatureMatrix m;
    m.subject_ids = subject_ids;
    m.timeframe = timeframe;
    m.y_default = y_default;
    m.values.resize(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols_.size()));
    m.missing.resize(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols_.size()));
    for (std::size_t k = 0; k < cols_.size(); ++k) {
      const auto j = static_cast<Eigen::Index>(cols_[k]);
      m.feature_names.push_back(feature_names[cols_[k]]);
      m.groups.push_back(groups[cols_[k]]);
      m.values.col(static_cast<Eigen::Index>(k)) = values.col(j);
      m.missing.col(static_cast<Eigen::Index>(k)) = missing.col(j);
    }
    return m;
  }

  FeatureMatrix select_rows(std::span<const std::size_t> rows_) const {
    FeatureMatrix m;
    m.feature_names = feature_names;
    m.groups = groups;
    m.values.resize(static_cast<Eigen::Index>(rows_.size()), values.cols());
    m.missing.resize(static_cast<Eigen::Index>(rows_.size()), values.cols());
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto i = rows_[k];
      m.subject_ids.push_back(subject_ids[i]);
      m.timeframe.push_back(timeframe[i]);
      m.y_default.push_back(y_default[i]);
      m.values.row(static_cast<Eigen::Index>(k)) = values.row(static_cast<Eigen::Index>(i));
      m.missing.row(static_cast<Eigen::Index>(k)) = missing.row(static_cast<Eigen::Index>(i));
    }
    return m;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& n : feature_names)
      if (!seen.insert(n).second) throw DataError("duplicate feature name '" + n + "'");
    if (groups.size() != cols() || static_cast<std::size_t>(values.cols()) != cols() ||
        static_cast<std::size_t>(values.rows()) != rows() || timeframe.size() != rows() || y_default.size() != rows())
      throw DataError("feature matrix dimensions are inconsistent");
    if (!values.allFinite()) throw DataError("feature matrix contains non-finite values");
  }
};

// One group's rows for one timeframe, keyed by subject id.
struct GroupBlock {
  FeatureGroup group;
  std::vector<std::string> names;
  std::map<std::string, FeatureRow> rows;
};

struct TimeframeBlocks {
  int timeframe = 0;
  std::vector<GroupBlock> groups;
  std::map<std::string, bool> targets;  // every subject of the timeframe -> y_default
};

struct AssembleStats {
  std::size_t subjects_in = 0;
  std::size_t dropped_missing_group = 0;
  std::vector<std::string> dropped;  // "timeframe:subject"
};

// Stacks timeframes into one matrix. Subjects lacking any group are dropped
// and counted; the same subject in two timeframes yields two rows.
inline FeatureMatrix assemble(const std::vector<TimeframeBlocks>& timeframes, AssembleStats* stats = nullptr) {
  FeatureMatrix m;
  AssembleStats local;
  if (timeframes.empty()) {
    m.values.resize(0, 0);
    m.missing.resize(0, 0);
    if (stats) *stats = local;
    return m;
  }
  for (const auto& b : timeframes.front().groups)
    for (const auto& n : b.names) {
      m.feature_names.push_back(n);
      m.groups.push_back(b.group);
    }
  for (const auto& tf : timeframes) {
    std::vector<std::string> names;
    for (const auto& b : tf.groups) names.insert(names.end(), b.names.begin(), b.names.end());
    if (names != m.feature_names) throw DataError("timeframes disagree on feature layout");
  }

  struct Pending {
    const TimeframeBlocks* tf;
    const std::string* id;
    bool y;
  };
  std::vector<Pending> keep;
  for (const auto& tf : timeframes)
    for (const auto& [id, y] : tf.targets) {
      ++local.subjects_in;
      const bool complete =
          std::all_of(tf.groups.begin(), tf.groups.end(), [&](const GroupBlock& b) { return b.rows.count(id) > 0; });
      if (!complete) {
        ++local.dropped_missing_group;
        local.dropped.push_back(std::to_string(tf.timeframe) + ":" + id);
        continue;
      }
      keep.push_back({&tf, &id, y});
    }

  const auto n = static_cast<Eigen::Index>(keep.size());
  const auto p = static_cast<Eigen::Index>(m.feature_names.size());
  m.values = Eigen::MatrixXd::Zero(n, p);
  m.missing = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, p, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& k = keep[static_cast<std::size_t>(i)];
    m.subject_ids.push_back(*k.id);
    m.timeframe.push_back(k.tf->timeframe);
    m.y_default.push_back(k.y ? 1 : 0);
    Eigen::Index j = 0;
    for (const auto& b : k.tf->groups) {
      const auto& row = b.rows.at(*k.id);
      if (row.values.size() != b.names.size()) throw DataError("feature row width does not match its group");
      for (std::size_t c = 0; c < row.values.size(); ++c, ++j) {
        m.values(i, j) = row.missing[c] ? 0.0 : row.values[c];
        m.missing(i, j) = row.missing[c] != 0;
      }
    }
  }
  m.validate();
  if (stats) *stats = local;
  return m;
}

struct CorrelationPruning {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped_constant;
  std::vector<std::size_t> dropped_correlated;
};

// Greedy pass in column order: constant columns go first, then any column whose
// absolute Pearson correlation with an already kept column exceeds `threshold`.
// Statistics use only `rows` when given.
inline CorrelationPruning correlation_pruning(const FeatureMatrix& m, double threshold,
                                              std::span<const std::size_t> rows = {}) {
  if (!(threshold > 0 && threshold <= 1)) throw UsageError("correlation threshold must lie in (0,1]");
  Eigen::MatrixXd x;
  if (rows.empty()) {
    x = m.values;
  } else {
    x.resize(static_cast<Eigen::Index>(rows.size()), m.values.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
      x.row(static_cast<Eigen::Index>(k)) = m.values.row(static_cast<Eigen::Index>(rows[k]));
  }
  CorrelationPruning out;
  std::vector<Eigen::Index> live;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (x.rows() == 0 || x.col(j).maxCoeff() == x.col(j).minCoeff()) {
      out.dropped_constant.push_back(static_cast<std::size_t>(j));
      continue;
    }
    x.col(j).array() -= x.col(j).mean();
    x.col(j).normalize();
    live.push_back(j);
  }
  Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(live.size()));
  for (std::size_t k = 0; k < live.size(); ++k) z.col(static_cast<Eigen::Index>(k)) = x.col(live[k]);
  const Eigen::MatrixXd corr = z.transpose() * z;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(live.size()); ++a) {
    bool keep = true;
    for (Eigen::Index b : kept)
      if (std::abs(corr(a, b)) > threshold) {
        keep = false;
        break;
      }
    if (keep) kept.push_back(a);
    else out.dropped_correlated.push_back(static_cast<std::size_t>(live[static_cast<std::size_t>(a)]));
  }
  for (Eigen::Index a : kept) out.kept.push_back(static_cast<std::size_t>(live[static_cast<std::size_t>(a)]));
  return out;
}

inline FeatureMatrix drop_correlated(const FeatureMatrix& m, double threshold = 0.95,
                                     std::span<const std::size_t> rows = {}) {
  const auto pruning = correlation_pruning(m, threshold, rows);
  return m.select_columns(pruning.kept);
}

// CSV with header: subject_id,timeframe,<name:group>...,y_default. Missing is NA.
inline void write_feature_matrix(std::ostream& out, const FeatureMatrix& m) {
  out << "subject_id,timeframe";
  for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << m.feature_names[j] << ':' << group_tag(m.groups[j]);
  out << ",y_default\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv::quote_if_needed(m.subject_ids[i]) << ',' << m.timeframe[i];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      out << ',';
      if (m.missing(r, j)) out << "NA";
      else out << csv::format_double(m.values(r, j));
    }
    out << ',' << int(m.y_default[i]) << '\n';
  }
}

inline FeatureMatrix read_feature_matrix(std::istream& in) {
  const auto t = csv::Table::read(in, "feature matrix");
  const auto& header = t.header();
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "timeframe" || header.back() != "y_default")
    throw DataError("feature matrix: unexpected header layout");
  FeatureMatrix m;
  for (std::size_t j = 2; j + 1 < header.size(); ++j) {
    const auto colon = header[j].rfind(':');
    if (colon == std::string::npos) throw DataError("feature matrix: column '" + header[j] + "' lacks a group tag");
    m.feature_names.push_back(header[j].substr(0, colon));
    m.groups.push_back(parse_group(header[j].substr(colon + 1)));
  }
  const auto n = static_cast<Eigen::Index>(t.rows().size());
  const auto p = static_cast<Eigen::Index>(m.feature_names.size());
  m.values = Eigen::MatrixXd::Zero(n, p);
  m.missing = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, p, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    if (t.rows()[r].size() != header.size()) throw RowError(t.line_number(r), "wrong number of fields");
    m.subject_ids.emplace_back(t.cell(r, 0));
    auto tf = csv::parse_int<int>(t.cell(r, 1));
    if (!tf) throw RowError(t.line_number(r), "bad timeframe");
    m.timeframe.push_back(*tf);
    for (Eigen::Index j = 0; j < p; ++j) {
      auto cell = t.cell(r, static_cast<std::size_t>(j) + 2);
      if (cell == "NA") {
        m.missing(i, j) = true;
        continue;
      }
      auto v = csv::parse_double(cell);
      if (!v) throw RowError(t.line_number(r), "bad value in column " + m.feature_names[static_cast<std::size_t>(j)]);
      m.values(i, j) = *v;
    }
    auto y = t.cell(r, header.size() - 1);
    if (y != "0" && y != "1") throw RowError(t.line_number(r), "y_default must be 0 or 1");
    m.y_default.push_back(y == "1");
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Whole-timeframe featurization

struct FeaturizeConfig {
  PropagationConfig propagation;
  DayBoundary day;
  int loyalty_k = 3;
  EdgeWeighting weighting = EdgeWeighting::call_count;
  SeedEnergy spa_energy = SeedEnergy::uniform;
  std::optional<double> explicit_cutoff;  // used when the network has no 3+ delinquent
  std::vector<FeatureGroup> groups{kFeatureGroups.begin(), kFeatureGroups.end()};
  int window_months = 3;
};

struct TimeframeGraphs {
  std::array<CallGraph, 3> by_mode;  // indexed like kGraphModes
  NodeLabelSet labels;
};

inline TimeframeGraphs build_timeframe_graphs(std::span<const CdrRecord> records, const BankData& bank,
                                              YearMonth card_month, int timeframe_id, const FeaturizeConfig& cfg) {
  const DateRange window = calendar::months_before(card_month, cfg.window_months);
  TimeframeGraphs out;
  for (std::size_t m = 0; m < kGraphModes.size(); ++m)
    out.by_mode[m] = build_graph(records, window, kGraphModes[m], cfg.weighting, timeframe_id);
  out.labels = label_nodes(out.by_mode[2].index(), bank, card_month);
  return out;
}

// Extracts every requested group for the subjects of one timeframe: customers
// whose card was issued in `card_month`. Network groups cover only subjects
// present in the call network of the preceding months.
inline TimeframeBlocks featurize_timeframe(std::span<const CdrRecord> records, const BankData& bank,
                                           YearMonth card_month, int timeframe_id, const FeaturizeConfig& cfg,
                                           const TimeframeGraphs* prebuilt = nullptr) {
  TimeframeGraphs local;
  if (!prebuilt) local = build_timeframe_graphs(records, bank, card_month, timeframe_id, cfg);
  const TimeframeGraphs& tg = prebuilt ? *prebuilt : local;
  const DateRange window = calendar::months_before(card_month, cfg.window_months);
  const DateRange debit_window = calendar::months_before(card_month, 1);
  auto wants = [&](FeatureGroup g) { return std::find(cfg.groups.begin(), cfg.groups.end(), g) != cfg.groups.end(); };

  TimeframeBlocks tf;
  tf.timeframe = timeframe_id;
  std::vector<const BankRecord*> subjects;
  for (const auto& r : bank.records)
    if (r.issue_month() == card_month) {
      subjects.push_back(&r);
      tf.targets.emplace(r.customer_id, r.is_default());
    }
  // Subjects' node ids, identical across the three mode graphs.
  std::vector<std::optional<NodeId>> node(subjects.size());
  for (std::size_t s = 0; s < subjects.size(); ++s) node[s] = tg.by_mode[2].index().find(subjects[s]->customer_id);

  if (wants(FeatureGroup::SD)) {
    GroupBlock b{FeatureGroup::SD, sociodemographic_names(), {}};
    for (const auto* r : subjects) b.rows.emplace(r->customer_id, sociodemographic_features(*r, debit_window, cfg.loyalty_k));
    tf.groups.push_back(std::move(b));
  }
  if (wants(FeatureGroup::CB)) {
    std::vector<std::string> ids;
    for (std::size_t s = 0; s < subjects.size(); ++s)
      if (node[s]) ids.push_back(subjects[s]->customer_id);
    CallingBehaviorAccumulator acc(ids, window, cfg.day);
    for (const auto& r : records) acc.add(r);
    GroupBlock b{FeatureGroup::CB, calling_behavior_names(), {}};
    for (std::size_t i = 0; i < ids.size(); ++i) {
      FeatureRow row;
      row.values = acc.features(i);
      row.missing.assign(row.values.size(), 0);
      b.rows.emplace(ids[i], std::move(row));
    }
    tf.groups.push_back(std::move(b));
  }
  if (wants(FeatureGroup::LB)) {
    GroupBlock b{FeatureGroup::LB, {}, {}};
    for (auto m : kGraphModes) {
      auto names = link_based_names(m);
      b.names.insert(b.names.end(), names.begin(), names.end());
    }
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      if (!node[s]) continue;
      FeatureRow row;
      for (std::size_t m = 0; m < 3; ++m) {
        auto f = link_based_features(tg.by_mode[m], tg.labels, *node[s]);
        row.values.insert(row.values.end(), f.begin(), f.end());
      }
      row.missing.assign(row.values.size(), 0);
      b.rows.emplace(subjects[s]->customer_id, std::move(row));
    }
    tf.groups.push_back(std::move(b));
  }
  for (auto method : {PropagationMethod::pagerank, PropagationMethod::spreading_activation}) {
    const auto group = method == PropagationMethod::pagerank ? FeatureGroup::PR : FeatureGroup::SPA;
    if (!wants(group)) continue;
    GroupBlock b{group, {}, {}};
    struct Run {
      std::size_t mode;
      SeedCriterion seeds;
      ExposureVector exposure;
      RiskRelabeling relabel;
    };
    std::vector<Run> runs;
    for (auto seeds : kSeedCriteria)
      for (std::size_t m = 0; m < 3; ++m) runs.push_back({m, seeds, {}, {}});
    parallel_for(runs.size(), [&](std::size_t k) {
      auto& run = runs[k];
      const auto& g = tg.by_mode[run.mode];
      run.exposure = method == PropagationMethod::pagerank
                         ? personalized_pagerank(g, tg.labels, run.seeds, cfg.propagation)
                         : spreading_activation(g, tg.labels, run.seeds, cfg.propagation, cfg.spa_energy);
      double cutoff;
      try {
        cutoff = exposure_cutoff(run.exposure, tg.labels);
      } catch (const DataError&) {
        if (!cfg.explicit_cutoff) throw;
        cutoff = *cfg.explicit_cutoff;
      }
      run.relabel = relabel_high_risk(run.exposure, cutoff);
    });
    for (const auto& run : runs) {
      auto names = exposure_link_names(method, run.seeds, kGraphModes[run.mode]);
      b.names.insert(b.names.end(), names.begin(), names.end());
    }
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      if (!node[s]) continue;
      FeatureRow row;
      for (const auto& run : runs) {
        auto f = exposure_link_features(tg.by_mode[run.mode], run.exposure, run.relabel, *node[s]);
        row.values.insert(row.values.end(), f.begin(), f.end());
      }
      row.missing.assign(row.values.size(), 0);
      b.rows.emplace(subjects[s]->customer_id, std::move(row));
    }
    tf.groups.push_back(std::move(b));
  }
  return tf;
}

}  // namespace cdrscore
