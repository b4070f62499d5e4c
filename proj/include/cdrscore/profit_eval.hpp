#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdrscore/error.hpp"
#include "cdrscore/models.hpp"
#include "cdrscore/netstats.hpp"
#include "cdrscore/parallel.hpp"
#include "cdrscore/random.hpp"

namespace cdrscore {

// Score convention throughout: higher score = more likely to default, and an
// application is rejected when its score is at or above the cutoff.

inline void require_both_classes(std::span<const double> score, std::span<const std::uint8_t> y) {
  if (score.size() != y.size()) throw DataError("scores and labels differ in length");
  const auto pos = count_positive(y);
  if (pos == 0 || pos == y.size()) throw DataError("evaluation needs both classes present");
}

// ---------------------------------------------------------------------------
// ROC

struct RocPoint {
  double f1;  // share of non-defaulters rejected
  double f0;  // share of defaulters rejected
  double threshold;  // reject score >= threshold; +inf for the empty rejection set
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), one per distinct score
  double auc = 0;
};

inline RocCurve roc_and_auc(std::span<const double> score, std::span<const std::uint8_t> y) {
  require_both_classes(score, y);
  const double n0 = static_cast<double>(count_positive(y));
  const double n1 = static_cast<double>(y.size()) - n0;
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] > score[b]; });
  RocCurve roc;
  roc.points.push_back({0, 0, std::numeric_limits<double>::infinity()});
  double bad = 0, good = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = score[order[i]];
    for (; i < order.size() && score[order[i]] == s; ++i) (y[order[i]] ? bad : good) += 1;
    roc.points.push_back({good / n1, bad / n0, s});
  }
  roc.points.back().f0 = 1;
  roc.points.back().f1 = 1;
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    const auto& a = roc.points[k - 1];
    const auto& b = roc.points[k];
    roc.auc += (b.f1 - a.f1) * (a.f0 + b.f0) / 2;
  }
  return roc;
}

// ---------------------------------------------------------------------------
// DeLong paired comparison

struct DelongResult {
  double auc_a = 0, auc_b = 0;
  double auc_diff = 0;  // a - b
  double variance = 0;
  double z = 0;
  double p_value = 1;
};

namespace detail {

inline std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) r[order[k]] = (double(i) + double(j) + 1) / 2;
    i = j;
  }
  return r;
}

}  // namespace detail

// Structural components of one score vector: v10 per positive, v01 per negative.
struct StructuralComponents {
  std::vector<double> v10, v01;
  double auc = 0;
};

inline StructuralComponents structural_components(std::span<const double> score, std::span<const std::uint8_t> y) {
  require_both_classes(score, y);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(score[i]);
  const double m = double(pos.size()), n = double(neg.size());
  const auto all = detail::midranks(score);
  const auto rp = detail::midranks(pos), rn = detail::midranks(neg);
  StructuralComponents c;
  std::size_t ip = 0, in = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) {
      c.v10.push_back((all[i] - rp[ip++]) / n);
    } else {
      c.v01.push_back(1.0 - (all[i] - rn[in++]) / m);
    }
  }
  c.auc = std::accumulate(c.v10.begin(), c.v10.end(), 0.0) / m;
  return c;
}

inline DelongResult delong_test(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> y) {
  if (a.size() != b.size()) throw DataError("paired scores differ in length");
  const auto ca = structural_components(a, y), cb = structural_components(b, y);
  auto cov = [](const std::vector<double>& u, const std::vector<double>& v) {
    const double mu = std::accumulate(u.begin(), u.end(), 0.0) / double(u.size());
    const double mv = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - mu) * (v[i] - mv);
    return s / double(u.size() - 1);
  };
  const double m = double(ca.v10.size()), n = double(ca.v01.size());
  DelongResult r;
  r.auc_a = ca.auc;
  r.auc_b = cb.auc;
  r.auc_diff = ca.auc - cb.auc;
  if (m < 2 || n < 2) throw DataError("DeLong test needs at least two instances per class");
  r.variance = (cov(ca.v10, ca.v10) + cov(cb.v10, cb.v10) - 2 * cov(ca.v10, cb.v10)) / m +
               (cov(ca.v01, ca.v01) + cov(cb.v01, cb.v01) - 2 * cov(ca.v01, cb.v01)) / n;
  if (!(r.variance > 0)) {
    r.variance = std::max(r.variance, 0.0);
    r.z = 0;
    r.p_value = 1;
    return r;
  }
  r.z = r.auc_diff / std::sqrt(r.variance);
  r.p_value = std::min(1.0, 2 * normal_cdf(-std::abs(r.z)));
  return r;
}

// ---------------------------------------------------------------------------
// Expected maximum profit

struct EmpParams {
  double roi = 0.05;
  double lgd = 0.8;
  double p0 = 0.55;  // mass of lambda at 0
  double p1 = 0.1;   // mass of lambda at its maximum, LGD
  std::optional<double> pi0;  // defaulter prior; taken from the data when empty

  void validate() const {
    if (!(roi > 0)) throw UsageError("ROI must be positive");
    if (!(lgd > 0 && lgd <= 1)) throw UsageError("LGD must lie in (0,1]");
    if (!(p0 >= 0 && p1 >= 0 && p0 + p1 <= 1 + 1e-12)) throw UsageError("p0, p1 must be non-negative with p0 + p1 <= 1");
    if (pi0 && !(*pi0 > 0 && *pi0 < 1)) throw UsageError("class prior must lie in (0,1)");
  }
  double uniform_density() const { return std::max(0.0, 1 - p0 - p1) / lgd; }
};

struct LoanOutcome {
  double principal = 0;  // A, the credit limit
  double ead = 0;        // drawn amount at default
  bool is_defaulter = false;

  double lambda(double lgd) const { return principal > 0 ? lgd * ead / principal : 0.0; }
};

// Point masses from the loss fractions of defaulted loans: share with nothing
// drawn, and share with the full limit drawn.
inline std::pair<double, double> estimate_lambda_masses(std::span<const LoanOutcome> loans) {
  std::size_t n = 0, zero = 0, full = 0;
  for (const auto& l : loans) {
    if (!l.is_defaulter) continue;
    ++n;
    if (l.ead <= 0) ++zero;
    else if (l.ead >= l.principal) ++full;
  }
  if (n == 0) throw DataError("no defaulted loans to estimate the loss distribution from");
  return {double(zero) / double(n), double(full) / double(n)};
}

struct EmpResult {
  double emp = 0;
  double emp_fraction = 0;  // expected share of applications rejected
  double pi0 = 0;
};

namespace detail {

// Upper convex hull of ROC points, as (f1, f0) from (0,0) to (1,1).
inline std::vector<RocPoint> roc_hull(const std::vector<RocPoint>& pts) {
  std::vector<RocPoint> h;
  for (const auto& p : pts) {
    while (h.size() >= 2) {
      const auto& a = h[h.size() - 2];
      const auto& b = h.back();
      const double cross = (b.f1 - a.f1) * (p.f0 - a.f0) - (b.f0 - a.f0) * (p.f1 - a.f1);
      if (cross >= 0) h.pop_back();  // b lies on or under segment a-p
      else break;
    }
    h.push_back(p);
  }
  return h;
}

inline double resolve_pi0(const EmpParams& p, std::span<const std::uint8_t> y) {
  return p.pi0 ? *p.pi0 : double(count_positive(y)) / double(y.size());
}

}  // namespace detail

// Integrates the best achievable profit over the loss distribution by walking
// the ROC convex hull. Vertex k is optimal for lambda between the switch
// points of its two adjacent segments; at a switch point the vertex with more
// rejections wins.
inline EmpResult emp(std::span<const double> score, std::span<const std::uint8_t> y, const EmpParams& params) {
  params.validate();
  const auto roc = roc_and_auc(score, y);
  const auto hull = detail::roc_hull(roc.points);
  if (hull.size() < 2) throw DataError("empty ROC hull");
  EmpResult r;
  r.pi0 = detail::resolve_pi0(params, y);
  const double pi0 = r.pi0, pi1 = 1 - pi0;
  const double inf = std::numeric_limits<double>::infinity();

  // switch[k]: smallest lambda at which vertex k beats vertex k-1
  std::vector<double> sw(hull.size() + 1);
  sw[0] = 0;
  for (std::size_t k = 1; k < hull.size(); ++k) {
    const double df1 = hull[k].f1 - hull[k - 1].f1, df0 = hull[k].f0 - hull[k - 1].f0;
    sw[k] = df0 > 0 ? params.roi * pi1 * df1 / (pi0 * df0) : inf;
  }
  sw[hull.size()] = inf;

  auto vertex_at = [&](double lambda) {
    std::size_t k = 0;
    while (k + 1 < hull.size() && sw[k + 1] <= lambda) ++k;
    return k;
  };
  auto profit = [&](std::size_t k, double lambda) { return lambda * pi0 * hull[k].f0 - params.roi * pi1 * hull[k].f1; };
  auto rejected = [&](std::size_t k) { return pi0 * hull[k].f0 + pi1 * hull[k].f1; };

  const std::size_t k0 = vertex_at(0.0), k1 = vertex_at(params.lgd);
  r.emp = params.p0 * profit(k0, 0.0) + params.p1 * profit(k1, params.lgd);
  r.emp_fraction = params.p0 * rejected(k0) + params.p1 * rejected(k1);
  const double u = params.uniform_density();
  if (u > 0) {
    for (std::size_t k = 0; k < hull.size(); ++k) {
      const double a = std::clamp(sw[k], 0.0, params.lgd), b = std::clamp(sw[k + 1], 0.0, params.lgd);
      if (!(b > a)) continue;
      r.emp += u * (pi0 * hull[k].f0 * (b * b - a * a) / 2 - params.roi * pi1 * hull[k].f1 * (b - a));
      r.emp_fraction += u * rejected(k) * (b - a);
    }
  }
  return r;
}

// Brute-force reference: midpoint grid over lambda with an exhaustive scan of
// every empirical threshold, plus the two point masses.
inline double emp_oracle(std::span<const double> score, std::span<const std::uint8_t> y, const EmpParams& params,
                         std::size_t grid_size = 10000) {
  params.validate();
  if (grid_size < 1000) throw UsageError("oracle grid needs at least 1000 points");
  const auto roc = roc_and_auc(score, y);
  const double pi0 = detail::resolve_pi0(params, y), pi1 = 1 - pi0;
  auto best = [&](double lambda) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : roc.points) m = std::max(m, lambda * pi0 * p.f0 - params.roi * pi1 * p.f1);
    return m;
  };
  double total = params.p0 * best(0.0) + params.p1 * best(params.lgd);
  const double u = params.uniform_density(), step = params.lgd / double(grid_size);
  if (u > 0)
    for (std::size_t k = 0; k < grid_size; ++k) total += u * step * best((double(k) + 0.5) * step);
  return total;
}

// Score threshold rejecting the achievable share of instances closest to
// `fraction` (ties go to fewer rejections).
inline double fraction_to_cutoff(std::span<const double> score, double fraction) {
  if (!(fraction >= 0 && fraction <= 1)) throw UsageError("rejection fraction must lie in [0,1]");
  if (score.empty()) throw DataError("no scores to place a cutoff on");
  std::vector<double> s(score.begin(), score.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  const double target = fraction * double(s.size());
  double cutoff = std::nextafter(s.front(), std::numeric_limits<double>::infinity());
  double best_gap = target;  // rejecting nobody
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double gap = std::abs(double(j) - target);
    if (gap < best_gap) {
      best_gap = gap;
      cutoff = s[i];
    }
    i = j;
  }
  return cutoff;
}

// ---------------------------------------------------------------------------
// Model profit in integer cents

using Cents = std::int64_t;

inline Cents to_cents(double amount) { return static_cast<Cents>(std::llround(amount * 100.0)); }

inline std::string format_cents(Cents c) {
  const bool neg = c < 0;
  const auto a = neg ? -c : c;
  std::string frac = std::to_string(a % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return (neg ? "-" : "") + std::to_string(a / 100) + "." + frac;
}

// Profit of one applicant given the decision, in cents.
inline Cents loan_profit(const LoanOutcome& loan, bool rejected, const EmpParams& p) {
  if (loan.is_defaulter) return rejected ? 0 : -to_cents(p.lgd * loan.ead);
  const Cents interest = to_cents(p.roi * loan.principal);
  return rejected ? -interest : interest;
}

struct ProfitBreakdown {
  Cents total = 0;
  std::size_t accepted_good = 0, rejected_good = 0, accepted_bad = 0, rejected_bad = 0;
};

inline ProfitBreakdown model_profit_from_decisions(std::span<const std::uint8_t> rejected,
                                                   std::span<const LoanOutcome> loans, const EmpParams& p) {
  if (rejected.size() != loans.size()) throw DataError("decisions and loans are misaligned");
  ProfitBreakdown b;
  for (std::size_t i = 0; i < loans.size(); ++i) {
    b.total += loan_profit(loans[i], rejected[i] != 0, p);
    if (loans[i].is_defaulter) (rejected[i] ? b.rejected_bad : b.accepted_bad) += 1;
    else (rejected[i] ? b.rejected_good : b.accepted_good) += 1;
  }
  return b;
}

inline ProfitBreakdown model_profit(std::span<const double> score, std::span<const LoanOutcome> loans,
                                    const EmpParams& p, double cutoff) {
  if (score.size() != loans.size()) throw DataError("scores and loans are misaligned");
  std::vector<std::uint8_t> rejected(score.size());
  for (std::size_t i = 0; i < score.size(); ++i) rejected[i] = score[i] >= cutoff;
  return model_profit_from_decisions(rejected, loans, p);
}

inline ProfitBreakdown no_model_profit(std::span<const LoanOutcome> loans, const EmpParams& p) {
  std::vector<std::uint8_t> none(loans.size(), 0);
  return model_profit_from_decisions(none, loans, p);
}

struct EmpReport {
  double auc = 0;
  double emp = 0;
  double emp_fraction = 0;
  double implied_cutoff = 0;
  std::size_t rejected = 0;
  Cents model_profit = 0;
  Cents no_model_profit = 0;
};

inline EmpReport evaluate_scores(std::span<const double> score, std::span<const std::uint8_t> y,
                                 std::span<const LoanOutcome> loans, const EmpParams& p) {
  EmpReport r;
  r.auc = roc_and_auc(score, y).auc;
  const auto e = emp(score, y, p);
  r.emp = e.emp;
  r.emp_fraction = e.emp_fraction;
  r.implied_cutoff = fraction_to_cutoff(score, e.emp_fraction);
  r.rejected = static_cast<std::size_t>(std::count_if(score.begin(), score.end(), [&](double s) { return s >= r.implied_cutoff; }));
  r.model_profit = model_profit(score, loans, p, r.implied_cutoff).total;
  r.no_model_profit = no_model_profit(loans, p).total;
  return r;
}

enum class SweepParameter { roi, lgd };

struct SweepRow {
  double value = 0;
  double emp = 0;
  double emp_fraction = 0;
};

inline std::vector<SweepRow> sensitivity_sweep(std::span<const double> score, std::span<const std::uint8_t> y,
                                               const EmpParams& base, SweepParameter which,
                                               std::span<const double> grid) {
  if (grid.empty()) throw UsageError("sensitivity sweep needs a non-empty grid");
  std::vector<SweepRow> rows;
  for (double v : grid) {
    EmpParams p = base;
    (which == SweepParameter::roi ? p.roi : p.lgd) = v;
    const auto e = emp(score, y, p);
    rows.push_back({v, e.emp, e.emp_fraction});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Feature importance

struct FeatureImportance {
  std::size_t feature = 0;
  std::optional<double> value;  // empty when undefined for this feature
};

// Descending by value; undefined entries last; ties by feature index.
inline void rank_importances(std::vector<FeatureImportance>& v) {
  std::stable_sort(v.begin(), v.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.value.has_value() != b.value.has_value()) return a.value.has_value();
    if (a.value && *a.value != *b.value) return *a.value > *b.value;
    return a.feature < b.feature;
  });
}

// Difference between the mean per-tree metric of trees using a feature and of
// trees not using it. Undefined when either side is empty.
inline std::vector<FeatureImportance> membership_difference(const ForestModel& f, std::span<const double> per_tree) {
  if (per_tree.size() != f.trees.size()) throw DataError("one value per tree expected");
  std::vector<FeatureImportance> out;
  for (std::size_t j = 0; j < f.n_features; ++j) {
    double with = 0, without = 0;
    std::size_t nw = 0, nwo = 0;
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
      if (f.trees[t].uses(static_cast<int>(j))) {
        with += per_tree[t];
        ++nw;
      } else {
        without += per_tree[t];
        ++nwo;
      }
    }
    FeatureImportance fi{j, std::nullopt};
    if (nw > 0 && nwo > 0) fi.value = with / double(nw) - without / double(nwo);
    out.push_back(fi);
  }
  rank_importances(out);
  return out;
}

// Per-tree profit with each tree's own class votes as decisions.
inline std::vector<double> per_tree_profit(const VoteMatrix& votes, std::span<const LoanOutcome> loans,
                                           const EmpParams& p) {
  std::vector<double> out(votes.n_trees);
  for (std::size_t t = 0; t < votes.n_trees; ++t)
    out[t] = double(model_profit_from_decisions(votes.tree(t), loans, p).total) / 100.0;
  return out;
}

// Mean decrease in profit, in currency units.
inline std::vector<FeatureImportance> profit_feature_importance(const ForestModel& f, const VoteMatrix& votes,
                                                                std::span<const LoanOutcome> loans,
                                                                const EmpParams& p) {
  return membership_difference(f, per_tree_profit(votes, loans, p));
}

inline std::vector<double> per_tree_accuracy(const VoteMatrix& votes, std::span<const std::uint8_t> y) {
  std::vector<double> out(votes.n_trees);
  for (std::size_t t = 0; t < votes.n_trees; ++t) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < votes.n_instances; ++i) hit += votes(t, i) == y[i];
    out[t] = double(hit) / double(votes.n_instances);
  }
  return out;
}

enum class AccuracyImportanceKind { permutation, membership };

// Permutation variant: drop in forest accuracy when one test column is
// shuffled. Only trees that split on the feature are re-evaluated.
inline std::vector<FeatureImportance> accuracy_feature_importance(const ForestModel& f, const Eigen::MatrixXd& x,
                                                                  std::span<const std::uint8_t> y,
                                                                  std::uint64_t seed,
                                                                  AccuracyImportanceKind kind =
                                                                      AccuracyImportanceKind::permutation,
                                                                  int threads = 0) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("test labels do not match rows");
  const auto votes = f.predict_per_tree(x, threads);
  if (kind == AccuracyImportanceKind::membership) return membership_difference(f, per_tree_accuracy(votes, y));

  const std::size_t n = votes.n_instances, nt = votes.n_trees;
  std::vector<std::uint32_t> base_count(n, 0);
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t i = 0; i < n; ++i) base_count[i] += votes(t, i);
  auto accuracy = [&](const std::vector<std::uint32_t>& count) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) hit += (2 * count[i] >= nt ? 1 : 0) == y[i];
    return double(hit) / double(n);
  };
  const double base = accuracy(base_count);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;

  std::vector<FeatureImportance> out(f.n_features);
  parallel_for(
      f.n_features,
      [&](std::size_t j) {
        out[j] = {j, 0.0};
        const auto col = x.col(static_cast<Eigen::Index>(j));
        if (n == 0 || col.maxCoeff() == col.minCoeff()) return;
        std::vector<Eigen::Index> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        auto eng = make_engine(seed, "permute", j);
        std::shuffle(perm.begin(), perm.end(), eng);
        auto count = base_count;
        std::vector<double> row(f.n_features);
        for (std::size_t t = 0; t < nt; ++t) {
          if (!f.trees[t].uses(static_cast<int>(j))) continue;
          for (std::size_t i = 0; i < n; ++i) {
            const double* src = xr.row(static_cast<Eigen::Index>(i)).data();
            std::copy(src, src + f.n_features, row.begin());
            row[j] = xr(perm[i], static_cast<Eigen::Index>(j));
            const auto v = f.trees[t].leaf_for_row(row.data()).vote;
            count[i] = count[i] - votes(t, i) + v;
          }
        }
        out[j].value = base - accuracy(count);
      },
      resolve_threads(threads));
  rank_importances(out);
  return out;
}

// ---------------------------------------------------------------------------
// Rank agreement

struct RankCorrelations {
  double spearman = 0;
  double kendall_tau_b = 0;
  double goodman_kruskal_gamma = 0;
};

// Compares two orderings of the same items given as per-item values (scores
// or ranks; larger means more important).
inline RankCorrelations rank_correlations(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("rankings cover different item sets");
  if (a.size() < 2) throw DataError("rank correlation needs at least two items");
  const auto ra = detail::midranks(a), rb = detail::midranks(b);
  const double n = double(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  RankCorrelations r;
  r.spearman = saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
  double concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0 && db == 0) continue;
      if (da == 0) ++ties_a;
      else if (db == 0) ++ties_b;
      else if ((da > 0) == (db > 0)) ++concordant;
      else ++discordant;
    }
  const double denom = std::sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b));
  r.kendall_tau_b = denom > 0 ? (concordant - discordant) / denom : 0.0;
  r.goodman_kruskal_gamma = concordant + discordant > 0 ? (concordant - discordant) / (concordant + discordant) : 0.0;
  return r;
}

}  // namespace cdrscore
