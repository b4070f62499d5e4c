#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cdrscore/call_graph.hpp"
#include "cdrscore/error.hpp"

namespace cdrscore {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Per-node default label; nullopt marks nodes outside the labeled population.
using DefaultLabels = std::vector<std::optional<bool>>;

struct HomophilyReport {
  std::size_t n_default = 0;
  std::size_t n_nondefault = 0;
  std::size_t m_total = 0;
  std::size_t m_cross = 0;
  std::size_t m_dyadic = 0;
  std::size_t m_nondefault = 0;  // good-good edges
  double expected_cross_fraction = 0;
  double observed_cross_fraction = 0;
  double z_statistic = 0;
  double p_value = 1;
  std::optional<double> dyadicity;
  double heterophilicity = 0;

  bool dyadic() const { return dyadicity && *dyadicity > 1.0; }
  bool heterophilic() const { return heterophilicity < 1.0; }
};

// Edge counts over the subgraph induced by labeled nodes. Edges are counted
// once regardless of weight.
inline HomophilyReport edge_partition(const CallGraph& g, const DefaultLabels& labels) {
  if (labels.size() != g.n_nodes()) throw DataError("label vector does not match the graph");
  HomophilyReport r;
  for (const auto& l : labels)
    if (l) (*l ? r.n_default : r.n_nondefault) += 1;
  for (NodeId u = 0; u < g.n_nodes(); ++u) {
    if (!labels[u]) continue;
    for (NodeId v : g.neighbors(u).ids) {
      // undirected graphs hold both half-edges; count each pair once
      if (g.mode() == GraphMode::undirected && v < u) continue;
      if (!labels[v]) continue;
      ++r.m_total;
      const bool a = *labels[u], b = *labels[v];
      if (a != b) ++r.m_cross;
      else if (a) ++r.m_dyadic;
      else ++r.m_nondefault;
    }
  }
  return r;
}

// One-tailed proportion test of the cross-label edge share against random
// mixing, with dyadicity and heterophilicity. The variance is taken at the
// expected proportion.
inline HomophilyReport homophily_test(const CallGraph& g, const DefaultLabels& labels) {
  auto r = edge_partition(g, labels);
  if (r.n_default == 0 || r.n_nondefault == 0) throw DataError("homophily test needs both labels present");
  if (r.m_total == 0) throw DataError("no edges among labeled nodes");
  const double n1 = static_cast<double>(r.n_default), n0 = static_cast<double>(r.n_nondefault);
  const double n = n1 + n0, m = static_cast<double>(r.m_total);
  const double pairs = n * (n - 1);
  r.expected_cross_fraction = 2 * n1 * n0 / pairs;
  r.observed_cross_fraction = static_cast<double>(r.m_cross) / m;
  const double e = r.expected_cross_fraction;
  const double se = std::sqrt(e * (1 - e) / m);
  r.z_statistic = se > 0 ? (r.observed_cross_fraction - e) / se : 0.0;
  r.p_value = normal_cdf(r.z_statistic);
  r.heterophilicity = static_cast<double>(r.m_cross) / (m * e);
  if (r.n_default >= 2) r.dyadicity = static_cast<double>(r.m_dyadic) / (m * n1 * (n1 - 1) / pairs);
  return r;
}

inline double dyadicity(const CallGraph& g, const DefaultLabels& labels) {
  auto r = homophily_test(g, labels);
  if (!r.dyadicity) throw DataError("dyadicity needs at least two defaulters");
  return *r.dyadicity;
}

inline double heterophilicity(const CallGraph& g, const DefaultLabels& labels) {
  return homophily_test(g, labels).heterophilicity;
}

inline void write_homophily_text(std::ostream& out, const HomophilyReport& r) {
  out << "labeled nodes      " << r.n_default + r.n_nondefault << " (" << r.n_default << " default)\n"
      << "edges              " << r.m_total << " (cross " << r.m_cross << ", default-default " << r.m_dyadic
      << ", good-good " << r.m_nondefault << ")\n"
      << "cross fraction     observed " << r.observed_cross_fraction << ", expected " << r.expected_cross_fraction
      << "\n"
      << "proportion test    z = " << r.z_statistic << ", one-tailed p = " << r.p_value << "\n"
      << "dyadicity          " << (r.dyadicity ? std::to_string(*r.dyadicity) : std::string("NA"))
      << (r.dyadic() ? " (dyadic)" : " (not dyadic)") << "\n"
      << "heterophilicity    " << r.heterophilicity << (r.heterophilic() ? " (heterophilic)" : " (not heterophilic)")
      << "\n";
}

}  // namespace cdrscore
