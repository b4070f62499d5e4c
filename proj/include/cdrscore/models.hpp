#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cdrscore/error.hpp"
#include "cdrscore/parallel.hpp"
#include "cdrscore/random.hpp"

namespace cdrscore {

using Labels = std::vector<std::uint8_t>;  // 1 = default (positive class)

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

template <class T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}
template <class T>
std::vector<T> take(const std::vector<T>& v, std::span<const std::size_t> rows) {
  return take(std::span<const T>(v), rows);
}

inline std::size_t count_positive(std::span<const std::uint8_t> y) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// Data protocol

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 1;
  bool stratified = true;

  void validate() const {
    if (!(train_fraction > 0 && train_fraction < 1)) throw UsageError("train fraction must lie in (0,1)");
  }
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Row indices of each part, ascending. Stratification rounds each class to
// its own share, so the test base rate is within one instance of the total.
inline SplitIndices split(std::span<const std::uint8_t> y, const SplitSpec& spec) {
  spec.validate();
  if (y.empty()) throw DataError("cannot split an empty dataset");
  auto eng = make_engine(spec.seed, "split");
  SplitIndices out;
  auto take_share = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), eng);
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  };
  if (spec.stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    if (pos.size() < 2 || neg.size() < 2)
      throw DataError("too few instances of the minority class to stratify (" +
                      std::to_string(std::min(pos.size(), neg.size())) + ")");
    take_share(std::move(pos));
    take_share(std::move(neg));
  } else {
    std::vector<std::size_t> all(y.size());
    std::iota(all.begin(), all.end(), 0);
    take_share(std::move(all));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// Keeps every minority row and a random subset of the majority so that
// minority:majority = ratio. Returns positions into `y`, in their original order.
inline std::vector<std::size_t> undersample(std::span<const std::uint8_t> y, double ratio, std::uint64_t seed) {
  if (!(ratio > 0)) throw UsageError("undersampling ratio must be positive");
  const std::size_t pos = count_positive(y), neg = y.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("undersampling needs both classes present");
  const std::uint8_t minority = pos <= neg ? 1 : 0;
  const std::size_t n_min = std::min(pos, neg), n_maj = std::max(pos, neg);
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n_min) / ratio));
  if (target > n_maj)
    throw DataError("undersampling ratio unreachable: need " + std::to_string(target) + " majority rows, have " +
                    std::to_string(n_maj));
  std::vector<std::size_t> majority;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] != minority) majority.push_back(i);
  auto eng = make_engine(seed, "undersample");
  std::shuffle(majority.begin(), majority.end(), eng);
  std::vector<std::uint8_t> keep(y.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == minority) keep[i] = 1;
  for (std::size_t k = 0; k < target; ++k) keep[majority[k]] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticConfig {
  double ridge = 1e-6;
  double tolerance = 1e-8;
  int max_iterations = 100;
};

inline double clamp_probability(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(p, lo, hi);
}

inline double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

struct LogisticModel {
  double intercept = 0;
  Eigen::VectorXd coef;   // on standardized features; 0 for constant columns
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // 0 marks a constant column
  int iterations = 0;

  std::vector<double> predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != coef.size()) throw DataError("feature count does not match the model");
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double eta = intercept;
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (scale[j] > 0) eta += coef[j] * (x(i, j) - mean[j]) / scale[j];
      out[static_cast<std::size_t>(i)] = clamp_probability(sigmoid(eta));
    }
    return out;
  }
};

// Iteratively reweighted least squares on standardized features with a small
// ridge on the slopes. Step halving keeps the penalized deviance decreasing,
// so separable data converges as the deviance flattens out.
inline LogisticModel train_logistic(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                                    const LogisticConfig& cfg = {}) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n == 0 || static_cast<std::size_t>(n) != y.size()) throw DataError("logistic: bad training data");
  LogisticModel m;
  m.mean = x.colwise().mean().transpose();
  m.scale.resize(p);
  m.coef = Eigen::VectorXd::Zero(p);
  std::vector<Eigen::Index> live;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double sd = std::sqrt((x.col(j).array() - m.mean[j]).square().sum() / static_cast<double>(n));
    m.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(m.mean[j])) ? sd : 0.0;
    if (m.scale[j] > 0) live.push_back(j);
  }
  const auto k = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd z(n, k + 1);
  z.col(0).setOnes();
  for (Eigen::Index c = 0; c < k; ++c) z.col(c + 1) = (x.col(live[static_cast<std::size_t>(c)]).array() - m.mean[live[static_cast<std::size_t>(c)]]) / m.scale[live[static_cast<std::size_t>(c)]];
  Eigen::VectorXd yy(n);
  for (Eigen::Index i = 0; i < n; ++i) yy[i] = y[static_cast<std::size_t>(i)];
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(k + 1, cfg.ridge);
  penalty[0] = 0;

  auto deviance = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = z * beta;
    double dev = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + e^eta) - y*eta, computed stably
      const double e = eta[i];
      dev += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - yy[i] * e;
    }
    return 2 * dev + (penalty.array() * beta.array().square()).sum();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
  double dev = deviance(beta);
  bool converged = false;
  int it = 0;
  for (it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXd eta = z * beta;
    Eigen::VectorXd w(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta[i]);
      w[i] = pi * (1 - pi);
      r[i] = yy[i] - pi;
    }
    Eigen::MatrixXd h = z.transpose() * w.asDiagonal() * z;
    h.diagonal() += penalty;
    const Eigen::VectorXd grad = z.transpose() * r - penalty.cwiseProduct(beta);
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    double t = 1.0, next_dev = dev;
    Eigen::VectorXd next = beta;
    for (int halving = 0; halving < 40; ++halving, t /= 2) {
      next = beta + t * step;
      next_dev = deviance(next);
      if (std::isfinite(next_dev) && next_dev <= dev) break;
    }
    if (!(next_dev <= dev)) {  // no descent possible: already at the optimum
      converged = true;
      break;
    }
    const double change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
    beta = next;
    dev = next_dev;
    if (change < cfg.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) throw ConvergenceError("logistic regression", cfg.max_iterations, dev);
  m.iterations = std::min(it, cfg.max_iterations);
  m.intercept = beta[0];
  for (Eigen::Index c = 0; c < k; ++c) m.coef[live[static_cast<std::size_t>(c)]] = beta[c + 1];
  return m;
}

// ---------------------------------------------------------------------------
// Classification trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;  // left takes x <= threshold
  double p_positive = 0;
  std::uint32_t n = 0;
  std::uint8_t vote = 0;
};

struct TreeConfig {
  int max_depth = std::numeric_limits<int>::max();
  std::size_t min_leaf = 5;
  std::size_t mtry = 0;  // 0 = every feature at every split
};

struct TreeModel {
  std::vector<TreeNode> nodes;
  std::vector<int> features_used;  // sorted, unique
  int depth = 0;
  std::size_t n_features = 0;

  const TreeNode& leaf_for(const Eigen::MatrixXd& x, Eigen::Index row) const {
    const TreeNode* t = &nodes.front();
    while (t->feature >= 0) t = &nodes[static_cast<std::size_t>(x(row, t->feature) <= t->threshold ? t->left : t->right)];
    return *t;
  }
  template <class Row>
  const TreeNode& leaf_for_row(const Row& r) const {
    const TreeNode* t = &nodes.front();
    while (t->feature >= 0) t = &nodes[static_cast<std::size_t>(r[t->feature] <= t->threshold ? t->left : t->right)];
    return *t;
  }

  std::vector<double> predict(const Eigen::MatrixXd& x) const {
    check(x);
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = leaf_for(x, i).p_positive;
    return out;
  }
  std::vector<std::uint8_t> predict_class(const Eigen::MatrixXd& x) const {
    check(x);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = leaf_for(x, i).vote;
    return out;
  }
  bool uses(int feature) const { return std::binary_search(features_used.begin(), features_used.end(), feature); }

 private:
  void check(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != n_features) throw DataError("feature count does not match the tree");
  }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, const TreeConfig& cfg, Engine* eng)
      : x_(x), y_(y), cfg_(cfg), eng_(eng) {
    all_features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(all_features_.begin(), all_features_.end(), 0);
  }

  TreeModel build(std::vector<std::uint32_t> rows) {
    tree_.n_features = static_cast<std::size_t>(x_.cols());
    grow(rows, 0, 1);
    std::sort(tree_.features_used.begin(), tree_.features_used.end());
    tree_.features_used.erase(std::unique(tree_.features_used.begin(), tree_.features_used.end()),
                              tree_.features_used.end());
    return std::move(tree_);
  }

 private:
  struct Cand {
    double value;
    std::uint8_t y;
  };

  int grow(std::vector<std::uint32_t>& rows, int depth, std::uint8_t parent_vote) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.depth = std::max(tree_.depth, depth);
    std::size_t pos = 0;
    for (auto r : rows) pos += y_[r];
    const std::size_t n = rows.size();
    {
      auto& node = tree_.nodes.back();
      node.n = static_cast<std::uint32_t>(n);
      node.p_positive = n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;
      node.vote = 2 * pos > n ? 1 : (2 * pos < n ? 0 : parent_vote);
    }
    const std::uint8_t vote = tree_.nodes[static_cast<std::size_t>(id)].vote;
    if (pos == 0 || pos == n || n < 2 * cfg_.min_leaf || depth >= cfg_.max_depth) return id;

    std::span<const int> features = all_features_;
    if (cfg_.mtry > 0 && cfg_.mtry < all_features_.size()) {
      scratch_features_ = all_features_;
      for (std::size_t k = 0; k < cfg_.mtry; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, scratch_features_.size() - 1);
        std::swap(scratch_features_[k], scratch_features_[pick(*eng_)]);
      }
      features = std::span<const int>(scratch_features_).first(cfg_.mtry);
    }

    // maximize sum over children of (pos^2 + neg^2) / size
    const double parent = (double(pos) * pos + double(n - pos) * (n - pos)) / double(n);
    double best = parent + 1e-9 * double(n);
    int best_feature = -1;
    double best_threshold = 0;
    cand_.resize(n);
    for (int f : features) {
      for (std::size_t k = 0; k < n; ++k) cand_[k] = {x_(rows[k], f), y_[rows[k]]};
      std::sort(cand_.begin(), cand_.end(), [](const Cand& a, const Cand& b) { return a.value < b.value; });
      if (cand_.front().value == cand_.back().value) continue;
      std::size_t lp = 0;
      for (std::size_t k = 1; k < n; ++k) {
        lp += cand_[k - 1].y;
        if (cand_[k].value == cand_[k - 1].value) continue;
        if (k < cfg_.min_leaf || n - k < cfg_.min_leaf) continue;
        const double ln = double(k), rn = double(n - k);
        const double lpos = double(lp), rpos = double(pos - lp);
        const double score = (lpos * lpos + (ln - lpos) * (ln - lpos)) / ln +
                             (rpos * rpos + (rn - rpos) * (rn - rpos)) / rn;
        if (score > best) {
          best = score;
          best_feature = f;
          const double lo = cand_[k - 1].value, hi = cand_[k].value;
          double mid = lo + (hi - lo) / 2;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::uint32_t> left, right;
    for (auto r : rows) (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    std::vector<std::uint32_t>().swap(rows);
    tree_.features_used.push_back(best_feature);
    const int l = grow(left, depth + 1, vote);
    const int r = grow(right, depth + 1, vote);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  std::span<const std::uint8_t> y_;
  TreeConfig cfg_;
  Engine* eng_;
  std::vector<int> all_features_;
  std::vector<int> scratch_features_;
  std::vector<Cand> cand_;
  TreeModel tree_;
};

}  // namespace detail

// Root ties in the class vote go to the positive class.
inline TreeModel fit_tree(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, const TreeConfig& cfg,
                          std::vector<std::uint32_t> rows = {}, Engine* eng = nullptr) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("tree: labels do not match rows");
  if (x.rows() == 0) throw DataError("tree: empty training set");
  if (cfg.mtry > static_cast<std::size_t>(x.cols())) throw UsageError("mtry exceeds the number of features");
  if (cfg.mtry > 0 && cfg.mtry < static_cast<std::size_t>(x.cols()) && !eng)
    throw UsageError("feature sampling needs a random engine");
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), 0u);
  }
  detail::TreeBuilder b(x, y, cfg, eng);
  return b.build(std::move(rows));
}

// ROC area via the rank-sum statistic, ties counted half.
inline double auc_rank(std::span<const double> score, std::span<const std::uint8_t> y) {
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] < score[b]; });
  double rank_sum = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && score[order[j]] == score[order[i]]) ++j;
    const double avg = (double(i) + double(j) + 1) / 2;
    for (std::size_t k = i; k < j; ++k)
      if (y[order[k]]) {
        rank_sum += avg;
        ++pos;
      }
    i = j;
  }
  const double neg = double(score.size() - pos);
  if (pos == 0 || neg == 0) throw DataError("AUC needs both classes present");
  return (rank_sum - double(pos) * (double(pos) + 1) / 2) / (double(pos) * neg);
}

struct TreeCvConfig {
  int folds = 10;
  std::vector<int> depth_grid{1, 2, 3, 4, 5, 6, 8, 10, 12};
  std::size_t min_leaf = 5;
  std::uint64_t seed = 1;
};

struct TreeCvResult {
  TreeModel tree;
  int chosen_depth = 0;
  std::vector<double> cv_auc;  // per grid entry
};

// Chooses the depth limit by mean validation AUC over stratified folds (ties go
// to the shallower tree) and refits on the full training set.
inline TreeCvResult train_tree(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, const TreeCvConfig& cfg = {}) {
  if (cfg.folds < 2) throw UsageError("cross validation needs at least 2 folds");
  if (cfg.depth_grid.empty()) throw UsageError("empty depth grid");
  const std::size_t pos = count_positive(y), neg = y.size() - pos;
  TreeCvResult out;
  if (pos == 0 || neg == 0) {
    out.tree = fit_tree(x, y, {0, cfg.min_leaf, 0});
    return out;
  }
  if (pos < static_cast<std::size_t>(cfg.folds) || neg < static_cast<std::size_t>(cfg.folds))
    throw DataError("each class needs at least " + std::to_string(cfg.folds) + " instances for cross validation");

  std::vector<int> fold(y.size());
  auto eng = make_engine(cfg.seed, "tree-cv");
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), eng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(cfg.folds));
  }
  out.cv_auc.assign(cfg.depth_grid.size(), 0.0);
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
    const Eigen::MatrixXd xtr = take_rows(x, tr), xva = take_rows(x, va);
    const auto ytr = take(y, std::span<const std::size_t>(tr)), yva = take(y, std::span<const std::size_t>(va));
    for (std::size_t g = 0; g < cfg.depth_grid.size(); ++g) {
      const auto t = fit_tree(xtr, ytr, {cfg.depth_grid[g], cfg.min_leaf, 0});
      out.cv_auc[g] += auc_rank(t.predict(xva), yva) / cfg.folds;
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < cfg.depth_grid.size(); ++g)
    if (out.cv_auc[g] > out.cv_auc[best] + 1e-12) best = g;
  out.chosen_depth = cfg.depth_grid[best];
  out.tree = fit_tree(x, y, {out.chosen_depth, cfg.min_leaf, 0});
  return out;
}

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  int n_trees = 500;
  std::size_t mtry = 0;  // 0 = ceil(sqrt(M))
  std::size_t min_leaf = 5;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  int threads = 0;
};

// Hard class votes, trees x instances.
struct VoteMatrix {
  std::size_t n_trees = 0, n_instances = 0;
  std::vector<std::uint8_t> votes;

  std::uint8_t operator()(std::size_t t, std::size_t i) const { return votes[t * n_instances + i]; }
  std::span<const std::uint8_t> tree(std::size_t t) const {
    return std::span<const std::uint8_t>(votes).subspan(t * n_instances, n_instances);
  }
};

struct ForestModel {
  std::vector<TreeModel> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::size_t mtry = 0;
  std::size_t n_features = 0;

  VoteMatrix predict_per_tree(const Eigen::MatrixXd& x, int threads = 0) const {
    if (static_cast<std::size_t>(x.cols()) != n_features) throw DataError("feature count does not match the forest");
    VoteMatrix v{trees.size(), static_cast<std::size_t>(x.rows()), {}};
    v.votes.resize(v.n_trees * v.n_instances);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
    parallel_for(
        trees.size(),
        [&](std::size_t t) {
          for (std::size_t i = 0; i < v.n_instances; ++i)
            v.votes[t * v.n_instances + i] = trees[t].leaf_for_row(xr.row(static_cast<Eigen::Index>(i)).data()).vote;
        },
        resolve_threads(threads));
    return v;
  }

  // Share of trees voting for default.
  static std::vector<double> scores_from_votes(const VoteMatrix& v) {
    std::vector<double> s(v.n_instances, 0.0);
    for (std::size_t t = 0; t < v.n_trees; ++t)
      for (std::size_t i = 0; i < v.n_instances; ++i) s[i] += v(t, i);
    for (auto& x : s) x /= static_cast<double>(v.n_trees);
    return s;
  }

  // Mean leaf default share over trees; votes are kept for per-tree profit.
  std::vector<double> predict(const Eigen::MatrixXd& x, int threads = 0) const {
    if (static_cast<std::size_t>(x.cols()) != n_features) throw DataError("feature count does not match the forest");
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
    std::vector<double> s(n, 0.0);
    // trees are summed in a fixed order per row so the result does not depend on threads
    parallel_for(
        n,
        [&](std::size_t i) {
          double sum = 0;
          for (const auto& t : trees) sum += t.leaf_for_row(xr.row(static_cast<Eigen::Index>(i)).data()).p_positive;
          s[i] = sum / static_cast<double>(trees.size());
        },
        resolve_threads(threads));
    return s;
  }
};

inline std::size_t default_mtry(std::size_t n_features) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
}

inline ForestModel train_forest(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, const ForestConfig& cfg = {}) {
  if (cfg.n_trees < 1) throw UsageError("a forest needs at least one tree");
  if (x.cols() == 0) throw DataError("forest: no features");
  const auto m = static_cast<std::size_t>(x.cols());
  const std::size_t mtry = cfg.mtry == 0 ? default_mtry(m) : cfg.mtry;
  if (mtry > m) throw UsageError("mtry (" + std::to_string(mtry) + ") exceeds the number of features (" + std::to_string(m) + ")");
  ForestModel f;
  f.mtry = mtry;
  f.n_features = m;
  f.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) f.tree_seeds.push_back(substream_seed(cfg.seed, "tree", static_cast<std::uint64_t>(t)));
  const auto n = static_cast<std::uint32_t>(x.rows());
  parallel_for(
      f.trees.size(),
      [&](std::size_t t) {
        Engine eng(f.tree_seeds[t]);
        std::vector<std::uint32_t> rows(n);
        if (cfg.bootstrap) {
          std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
          for (auto& r : rows) r = pick(eng);
        } else {
          std::iota(rows.begin(), rows.end(), 0u);
        }
        f.trees[t] = fit_tree(x, y, {std::numeric_limits<int>::max(), cfg.min_leaf, mtry}, std::move(rows), &eng);
      },
      resolve_threads(cfg.threads));
  return f;
}

// ---------------------------------------------------------------------------
// Any of the three classifiers

enum class ClassifierKind { logistic, tree, forest };

inline std::string_view classifier_tag(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::logistic: return "logit";
    case ClassifierKind::tree: return "tree";
    case ClassifierKind::forest: return "forest";
  }
  return "?";
}

inline ClassifierKind parse_classifier(std::string_view s) {
  if (s == "logit" || s == "logistic") return ClassifierKind::logistic;
  if (s == "tree") return ClassifierKind::tree;
  if (s == "forest" || s == "rf") return ClassifierKind::forest;
  throw UsageError("unknown model '" + std::string(s) + "' (expected logit, tree or forest)");
}

struct Classifier {
  std::variant<LogisticModel, TreeModel, ForestModel> model;
  std::vector<std::string> feature_names;

  ClassifierKind kind() const { return static_cast<ClassifierKind>(model.index()); }
  std::vector<double> predict(const Eigen::MatrixXd& x) const {
    return std::visit([&](const auto& m) { return m.predict(x); }, model);
  }
  const ForestModel* forest() const { return std::get_if<ForestModel>(&model); }
};

struct TrainConfig {
  ClassifierKind kind = ClassifierKind::forest;
  LogisticConfig logistic;
  TreeCvConfig tree;
  ForestConfig forest;
};

inline Classifier train_classifier(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, const TrainConfig& cfg,
                                   std::vector<std::string> names = {}) {
  Classifier c;
  c.feature_names = std::move(names);
  switch (cfg.kind) {
    case ClassifierKind::logistic: c.model = train_logistic(x, y, cfg.logistic); break;
    case ClassifierKind::tree: c.model = train_tree(x, y, cfg.tree).tree; break;
    case ClassifierKind::forest: c.model = train_forest(x, y, cfg.forest); break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON persistence

namespace detail {

inline nlohmann::json tree_to_json(const TreeModel& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes)
    nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                     {"p", n.p_positive}, {"n", n.n}, {"vote", n.vote}});
  return {{"n_features", t.n_features}, {"depth", t.depth}, {"features_used", t.features_used}, {"nodes", nodes}};
}

inline TreeModel tree_from_json(const nlohmann::json& j) {
  TreeModel t;
  t.n_features = j.at("n_features").get<std::size_t>();
  t.depth = j.at("depth").get<int>();
  t.features_used = j.at("features_used").get<std::vector<int>>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at("feature");
    node.threshold = n.at("threshold");
    node.left = n.at("left");
    node.right = n.at("right");
    node.p_positive = n.at("p");
    node.n = n.at("n");
    node.vote = n.at("vote");
    t.nodes.push_back(node);
  }
  if (t.nodes.empty()) throw DataError("tree model without nodes");
  for (const auto& n : t.nodes)
    if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || std::size_t(n.left) >= t.nodes.size() ||
                           std::size_t(n.right) >= t.nodes.size() || !std::isfinite(n.threshold)))
      throw DataError("tree model has a malformed node");
  return t;
}

inline std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
inline Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json classifier_to_json(const Classifier& c) {
  nlohmann::json j{{"model", classifier_tag(c.kind())}, {"features", c.feature_names}};
  if (const auto* m = std::get_if<LogisticModel>(&c.model)) {
    j["intercept"] = m->intercept;
    j["coef"] = detail::to_vec(m->coef);
    j["mean"] = detail::to_vec(m->mean);
    j["scale"] = detail::to_vec(m->scale);
  } else if (const auto* t = std::get_if<TreeModel>(&c.model)) {
    j["tree"] = detail::tree_to_json(*t);
  } else if (const auto* f = c.forest()) {
    j["mtry"] = f->mtry;
    j["n_features"] = f->n_features;
    j["tree_seeds"] = f->tree_seeds;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f->trees) trees.push_back(detail::tree_to_json(t));
    j["trees"] = std::move(trees);
  }
  return j;
}

inline Classifier classifier_from_json(const nlohmann::json& j) {
  Classifier c;
  try {
    c.feature_names = j.at("features").get<std::vector<std::string>>();
    switch (parse_classifier(j.at("model").get<std::string>())) {
      case ClassifierKind::logistic: {
        LogisticModel m;
        m.intercept = j.at("intercept");
        m.coef = detail::from_vec(j.at("coef").get<std::vector<double>>());
        m.mean = detail::from_vec(j.at("mean").get<std::vector<double>>());
        m.scale = detail::from_vec(j.at("scale").get<std::vector<double>>());
        c.model = std::move(m);
        break;
      }
      case ClassifierKind::tree: c.model = detail::tree_from_json(j.at("tree")); break;
      case ClassifierKind::forest: {
        ForestModel f;
        f.mtry = j.at("mtry");
        f.n_features = j.at("n_features");
        f.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
        for (const auto& t : j.at("trees")) f.trees.push_back(detail::tree_from_json(t));
        if (f.trees.empty()) throw DataError("forest model without trees");
        c.model = std::move(f);
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return c;
}

}  // namespace cdrscore
