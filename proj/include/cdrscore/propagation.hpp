#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrscore/call_graph.hpp"
#include "cdrscore/error.hpp"
#include "cdrscore/parallel.hpp"

namespace cdrscore {

enum class PropagationMethod { pagerank, spreading_activation };

// Which delinquent customers act as the information source.
enum class SeedCriterion { ge1 = 1, ge2 = 2, ge3 = 3 };

inline constexpr std::array<SeedCriterion, 3> kSeedCriteria = {SeedCriterion::ge1, SeedCriterion::ge2,
                                                               SeedCriterion::ge3};

inline SeedCriterion parse_seed_criterion(std::string_view s) {
  if (s == "ge1" || s == "1") return SeedCriterion::ge1;
  if (s == "ge2" || s == "2") return SeedCriterion::ge2;
  if (s == "ge3" || s == "3") return SeedCriterion::ge3;
  throw UsageError("unknown seed criterion '" + std::string(s) + "' (expected ge1, ge2 or ge3)");
}

enum class SeedEnergy { uniform, severity };
enum class Norm { l1, linf };

struct PropagationConfig {
  double alpha = 0.85;  // PR: probability of following an edge
  double d = 0.85;      // SPA: fraction of active energy spread per step
  double tolerance = 1e-6;
  int max_iterations = 100;
  Norm pagerank_norm = Norm::l1;
  Norm spreading_norm = Norm::linf;
  bool parallel = false;

  void validate() const {
    if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must lie in (0,1)");
    if (!(d > 0 && d < 1)) throw UsageError("d must lie in (0,1)");
    if (!(tolerance > 0)) throw UsageError("tolerance must be positive");
    if (max_iterations < 1) throw UsageError("max_iterations must be >= 1");
  }
};

struct ExposureVector {
  std::vector<double> scores;
  PropagationMethod method = PropagationMethod::pagerank;
  SeedCriterion seeds = SeedCriterion::ge1;
  int iterations_run = 0;
  double residual = 0.0;
};

struct RiskRelabeling {
  double cutoff = 0.0;
  std::vector<std::uint8_t> high_risk;
  std::size_t n_high = 0;
};

// Column-stochastic transition structure stored by destination row, so one
// propagation step is a gather: row i holds (j, w_ji / sum_s w_js) for every
// edge j -> i of the graph's neighbor relation.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(const CallGraph& g) : n_(g.n_nodes()) {
    out_weight_.assign(n_, 0.0);
    offsets_.assign(n_ + 1, 0);
    for (NodeId j = 0; j < n_; ++j) {
      auto nb = g.neighbors(j);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        out_weight_[j] += nb.weights[k];
        ++offsets_[nb.ids[k] + 1];
      }
    }
    for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
    sources_.resize(offsets_[n_]);
    coef_.resize(offsets_[n_]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (NodeId j = 0; j < n_; ++j) {  // ascending j keeps each row sorted
      auto nb = g.neighbors(j);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const std::size_t slot = fill[nb.ids[k]]++;
        sources_[slot] = j;
        coef_[slot] = nb.weights[k] / out_weight_[j];
      }
    }
  }

  std::size_t size() const { return n_; }
  bool dangling(NodeId j) const { return out_weight_[j] == 0.0; }

  // sum_j coef(i,j) * x[j] restricted to sources accepted by `use`
  template <typename Use>
  double gather(NodeId i, std::span<const double> x, Use&& use) const {
    double s = 0;
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k)
      if (use(sources_[k])) s += coef_[k] * x[sources_[k]];
    return s;
  }
  double gather(NodeId i, std::span<const double> x) const {
    double s = 0;
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) s += coef_[k] * x[sources_[k]];
    return s;
  }

 private:
  std::size_t n_;
  std::vector<double> out_weight_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> sources_;
  std::vector<double> coef_;
};

namespace detail {

inline double distance(std::span<const double> a, std::span<const double> b, Norm norm) {
  double r = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a[i] - b[i]);
    r = norm == Norm::l1 ? r + diff : std::max(r, diff);
  }
  return r;
}

template <typename Fn>
void for_each_node(std::size_t n, bool parallel, Fn&& fn) {
  if (!parallel) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) fn(i);
  });
}

}  // namespace detail

// Uniform restart mass over delinquent nodes meeting the criterion.
inline std::vector<double> restart_vector(const NodeLabelSet& labels, SeedCriterion criterion) {
  std::vector<double> z(labels.size(), 0.0);
  std::size_t count = 0;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels.delinquency[v] >= static_cast<int>(criterion)) {
      z[v] = 1.0;
      ++count;
    }
  if (count == 0) throw DataError("no delinquent nodes meet the seed criterion");
  for (double& x : z) x /= static_cast<double>(count);
  return z;
}

// Initial activation energy: 1 per seed, or the delinquency level for `severity`.
inline std::vector<double> seed_energy(const NodeLabelSet& labels, SeedCriterion criterion,
                                       SeedEnergy kind = SeedEnergy::uniform) {
  std::vector<double> e(labels.size(), 0.0);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const int level = labels.delinquency[v];
    if (level >= static_cast<int>(criterion)) e[v] = kind == SeedEnergy::uniform ? 1.0 : level;
  }
  return e;
}

// Personalized PageRank: iterates xi <- alpha * W~ xi + (1 - alpha) z, where
// W~ column-normalizes the edge weights and dangling nodes return their mass
// to z. z is normalized to sum 1, so the scores sum to 1.
inline ExposureVector personalized_pagerank(const CallGraph& graph, std::span<const double> restart,
                                            const PropagationConfig& config = {}) {
  config.validate();
  const std::size_t n = graph.n_nodes();
  if (restart.size() != n) throw UsageError("restart vector size does not match graph");
  double total = 0;
  for (double x : restart) {
    if (!(x >= 0) || !std::isfinite(x)) throw DataError("restart weights must be finite and non-negative");
    total += x;
  }
  if (!(total > 0)) throw DataError("restart vector is all zero");
  std::vector<double> z(restart.begin(), restart.end());
  for (double& x : z) x /= total;

  const TransitionMatrix W(graph);
  const double alpha = config.alpha;
  std::vector<double> cur = z, next(n);
  ExposureVector out;
  out.method = PropagationMethod::pagerank;
  for (int it = 1; it <= config.max_iterations; ++it) {
    double dangling_mass = 0;
    for (NodeId j = 0; j < n; ++j)
      if (W.dangling(j)) dangling_mass += cur[j];
    detail::for_each_node(n, config.parallel, [&](std::size_t i) {
      next[i] = alpha * W.gather(static_cast<NodeId>(i), cur) + (alpha * dangling_mass + (1 - alpha)) * z[i];
    });
    const double residual = detail::distance(next, cur, config.pagerank_norm);
    cur.swap(next);
    out.iterations_run = it;
    out.residual = residual;
    if (residual <= config.tolerance) {
      out.scores = std::move(cur);
      return out;
    }
  }
  throw ConvergenceError("personalized PageRank did not converge", out.iterations_run, out.residual);
}

inline ExposureVector personalized_pagerank(const CallGraph& graph, const NodeLabelSet& labels,
                                            SeedCriterion criterion, const PropagationConfig& config = {}) {
  auto z = restart_vector(labels, criterion);
  auto out = personalized_pagerank(graph, z, config);
  out.seeds = criterion;
  return out;
}

// Observer receives the per-node energy after every iteration.
using EnergyObserver = std::function<void(int iteration, std::span<const double> energy)>;

// Spreading activation. Each round, every active node keeps (1 - d) of its
// pending energy and passes d to its neighbors in proportion to edge weight;
// nodes without neighbors keep everything. Pending energy at or below the
// tolerance does not activate its node and is absorbed in place. The energy
// vector (absorbed plus pending) always sums to the initial energy.
inline ExposureVector spreading_activation(const CallGraph& graph, std::span<const double> initial_energy,
                                           const PropagationConfig& config = {},
                                           const EnergyObserver& observer = {}) {
  config.validate();
  const std::size_t n = graph.n_nodes();
  if (initial_energy.size() != n) throw UsageError("energy vector size does not match graph");
  bool any = false;
  for (double e : initial_energy) {
    if (!(e >= 0) || !std::isfinite(e)) throw DataError("seed energy must be finite and non-negative");
    any = any || e > 0;
  }
  if (!any) throw DataError("empty seed set");

  const TransitionMatrix W(graph);
  const double d = config.d, tol = config.tolerance;
  std::vector<double> kept(n, 0.0), pending(initial_energy.begin(), initial_energy.end()), next_pending(n);
  std::vector<double> energy(pending), next_energy(n);
  std::vector<std::uint8_t> spreads(n);

  ExposureVector out;
  out.method = PropagationMethod::spreading_activation;
  for (int it = 1; it <= config.max_iterations; ++it) {
    for (NodeId i = 0; i < n; ++i) {
      spreads[i] = pending[i] > tol && !W.dangling(i);
      if (pending[i] > 0) kept[i] += spreads[i] ? (1 - d) * pending[i] : pending[i];
    }
    detail::for_each_node(n, config.parallel, [&](std::size_t i) {
      next_pending[i] = d * W.gather(static_cast<NodeId>(i), pending, [&](NodeId j) { return spreads[j] != 0; });
      next_energy[i] = kept[i] + next_pending[i];
    });
    bool newly_affected = false;
    for (std::size_t i = 0; i < n; ++i)
      if (energy[i] <= tol && next_energy[i] > tol) newly_affected = true;
    const double change = detail::distance(next_energy, energy, config.spreading_norm);
    pending.swap(next_pending);
    energy.swap(next_energy);
    out.iterations_run = it;
    out.residual = change;
    if (observer) observer(it, energy);
    const bool idle = std::none_of(pending.begin(), pending.end(), [](double x) { return x > 0; });
    if (idle || (!newly_affected && change < tol)) break;
  }
  out.scores = std::move(energy);
  return out;
}

inline ExposureVector spreading_activation(const CallGraph& graph, const NodeLabelSet& labels,
                                           SeedCriterion criterion, const PropagationConfig& config = {},
                                           SeedEnergy kind = SeedEnergy::uniform) {
  auto e = seed_energy(labels, criterion, kind);
  auto out = spreading_activation(graph, e, config);
  out.seeds = criterion;
  return out;
}

// Minimum exposure among customers with three or more late payments.
inline double exposure_cutoff(const ExposureVector& exposure, const NodeLabelSet& labels) {
  if (exposure.scores.size() != labels.size()) throw UsageError("exposure and labels differ in size");
  double cutoff = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels.delinquency[v] >= 3) {
      cutoff = std::min(cutoff, exposure.scores[v]);
      found = true;
    }
  if (!found)
    throw DataError("no customer with three or more late payments in the network; supply an explicit cutoff");
  return cutoff;
}

inline RiskRelabeling relabel_high_risk(const ExposureVector& exposure, double cutoff) {
  if (!std::isfinite(cutoff)) throw UsageError("cutoff must be finite");
  RiskRelabeling r;
  r.cutoff = cutoff;
  r.high_risk.resize(exposure.scores.size());
  for (std::size_t v = 0; v < exposure.scores.size(); ++v) {
    r.high_risk[v] = exposure.scores[v] >= cutoff;
    r.n_high += r.high_risk[v];
  }
  return r;
}

inline void write_exposure(std::ostream& out, const NodeIndex& index, const ExposureVector& x) {
  out << "node_id,phone_id,score\n";
  for (std::size_t v = 0; v < x.scores.size(); ++v)
    out << v << ',' << csv::quote_if_needed(index.id_of(static_cast<NodeId>(v))) << ','
        << csv::format_double(x.scores[v]) << '\n';
}

}  // namespace cdrscore
