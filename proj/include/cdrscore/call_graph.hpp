#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdrscore/calendar.hpp"
#include "cdrscore/cdr_ingest.hpp"
#include "cdrscore/csv.hpp"
#include "cdrscore/error.hpp"

namespace cdrscore {

using NodeId = std::uint32_t;

enum class GraphMode { incoming, outgoing, undirected };
enum class EdgeWeighting { call_count, total_duration };

inline constexpr std::array<GraphMode, 3> kGraphModes = {GraphMode::incoming, GraphMode::outgoing,
                                                         GraphMode::undirected};

inline std::string_view mode_tag(GraphMode m) {
  switch (m) {
    case GraphMode::incoming: return "IN";
    case GraphMode::outgoing: return "OUT";
    case GraphMode::undirected: return "UD";
  }
  return "?";
}

inline GraphMode parse_mode(std::string_view s) {
  if (s == "in" || s == "IN" || s == "incoming") return GraphMode::incoming;
  if (s == "out" || s == "OUT" || s == "outgoing") return GraphMode::outgoing;
  if (s == "ud" || s == "UD" || s == "undirected") return GraphMode::undirected;
  throw UsageError("unknown graph mode '" + std::string(s) + "' (expected in, out or ud)");
}

// A call between dense node ids: src called dst.
struct WeightedEdge {
  NodeId src;
  NodeId dst;
  double weight;
  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

// Bijection between opaque identities and dense node ids.
class NodeIndex {
 public:
  NodeIndex() = default;
  explicit NodeIndex(std::vector<std::string> ids) : ids_(std::move(ids)) {
    lookup_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!lookup_.emplace(ids_[i], static_cast<NodeId>(i)).second)
        throw DataError("duplicate node identity '" + ids_[i] + "'");
    }
  }

  std::size_t size() const { return ids_.size(); }
  const std::string& id_of(NodeId v) const { return ids_.at(v); }
  const std::vector<std::string>& ids() const { return ids_; }

  std::optional<NodeId> find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, NodeId> lookup_;
};

struct Neighbors {
  std::span<const NodeId> ids;
  std::span<const double> weights;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

// Compressed sparse row call network. Row v lists neighbors(v) in ascending id
// order: callees for outgoing mode, callers for incoming mode, both for
// undirected mode (each logical edge appears in both endpoint rows).
class CallGraph {
 public:
  CallGraph() = default;

  // Aggregates directed call edges into a graph of the given mode. Parallel
  // edges are summed; self-loops are rejected.
  static CallGraph from_edges(NodeIndex index, std::span<const WeightedEdge> calls, GraphMode mode) {
    CallGraph g;
    g.mode_ = mode;
    const std::size_t n = index.size();
    g.index_ = std::move(index);

    std::vector<WeightedEdge> half;
    half.reserve(mode == GraphMode::undirected ? calls.size() * 2 : calls.size());
    for (const auto& e : calls) {
      if (e.src >= n || e.dst >= n) throw DataError("edge endpoint outside node index");
      if (e.src == e.dst) throw DataError("self-loop on node '" + g.index_.id_of(e.src) + "'");
      if (!(e.weight > 0)) throw DataError("edge weight must be positive");
      switch (mode) {
        case GraphMode::outgoing: half.push_back(e); break;
        case GraphMode::incoming: half.push_back({e.dst, e.src, e.weight}); break;
        case GraphMode::undirected:
          half.push_back(e);
          half.push_back({e.dst, e.src, e.weight});
          break;
      }
    }
    std::sort(half.begin(), half.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });

    g.offsets_.assign(n + 1, 0);
    g.targets_.reserve(half.size());
    g.weights_.reserve(half.size());
    for (std::size_t i = 0; i < half.size();) {
      const NodeId u = half[i].src, v = half[i].dst;
      double w = 0;
      for (; i < half.size() && half[i].src == u && half[i].dst == v; ++i) w += half[i].weight;
      g.targets_.push_back(v);
      g.weights_.push_back(w);
      ++g.offsets_[u + 1];
    }
    for (std::size_t v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
    g.targets_.shrink_to_fit();
    g.weights_.shrink_to_fit();
    g.n_edges_ = mode == GraphMode::undirected ? g.targets_.size() / 2 : g.targets_.size();
    return g;
  }

  GraphMode mode() const { return mode_; }
  std::size_t n_nodes() const { return index_.size(); }
  std::size_t n_edges() const { return n_edges_; }
  const NodeIndex& index() const { return index_; }

  Neighbors neighbors(NodeId v) const {
    if (v >= n_nodes()) throw std::out_of_range("unknown node id " + std::to_string(v));
    const auto b = offsets_[v], e = offsets_[v + 1];
    return {std::span<const NodeId>(targets_).subspan(b, e - b),
            std::span<const double>(weights_).subspan(b, e - b)};
  }

  std::size_t degree(NodeId v) const { return offsets_.at(v + 1) - offsets_.at(v); }

  double weighted_degree(NodeId v) const {
    double s = 0;
    for (double w : neighbors(v).weights) s += w;
    return s;
  }

  // Each logical edge once: in call direction for directed modes, src < dst
  // for undirected mode.
  std::vector<WeightedEdge> edge_list() const {
    std::vector<WeightedEdge> out;
    out.reserve(n_edges_);
    for (NodeId u = 0; u < n_nodes(); ++u) {
      auto nb = neighbors(u);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const NodeId v = nb.ids[k];
        switch (mode_) {
          case GraphMode::outgoing: out.push_back({u, v, nb.weights[k]}); break;
          case GraphMode::incoming: out.push_back({v, u, nb.weights[k]}); break;
          case GraphMode::undirected:
            if (u < v) out.push_back({u, v, nb.weights[k]});
            break;
        }
      }
    }
    return out;
  }

  double total_weight() const {
    double s = 0;
    for (double w : weights_) s += w;
    return mode_ == GraphMode::undirected ? s / 2 : s;
  }

  int timeframe_id = 0;
  std::size_t records_outside_window = 0;

 private:
  GraphMode mode_ = GraphMode::undirected;
  NodeIndex index_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> targets_;
  std::vector<double> weights_;
  std::size_t n_edges_ = 0;
};

// Builds the call network of one timeframe from duration-filtered records.
// Node ids follow the lexicographic order of identities, so the result does
// not depend on record order.
inline CallGraph build_graph(std::span<const CdrRecord> records, const DateRange& window, GraphMode mode,
                             EdgeWeighting weighting = EdgeWeighting::call_count, int timeframe_id = 0) {
  std::unordered_set<std::string_view> seen;
  std::size_t outside = 0;
  for (const auto& r : records) {
    if (!window.contains(r.start_date)) {
      ++outside;
      continue;
    }
    seen.insert(r.from_id);
    seen.insert(r.to_id);
  }
  std::vector<std::string_view> views(seen.begin(), seen.end());
  std::sort(views.begin(), views.end());
  NodeIndex index(std::vector<std::string>(views.begin(), views.end()));

  std::vector<WeightedEdge> calls;
  calls.reserve(records.size() - outside);
  for (const auto& r : records) {
    if (!window.contains(r.start_date)) continue;
    const double w = weighting == EdgeWeighting::call_count ? 1.0 : static_cast<double>(r.duration);
    if (!(w > 0)) continue;
    calls.push_back({*index.find(r.from_id), *index.find(r.to_id), w});
  }
  CallGraph g = CallGraph::from_edges(std::move(index), calls, mode);
  g.timeframe_id = timeframe_id;
  g.records_outside_window = outside;
  return g;
}

inline std::map<std::size_t, std::size_t> degree_distribution(const CallGraph& g) {
  std::map<std::size_t, std::size_t> dist;
  for (NodeId v = 0; v < g.n_nodes(); ++v) ++dist[g.degree(v)];
  return dist;
}

// ---------------------------------------------------------------------------
// Persistence: edge list (src,dst,weight over dense ids) plus node index.

inline void write_edge_list(std::ostream& out, const CallGraph& g) {
  out << "src,dst,weight\n";
  for (const auto& e : g.edge_list()) out << e.src << ',' << e.dst << ',' << csv::format_double(e.weight) << '\n';
}

inline void write_node_index(std::ostream& out, const NodeIndex& index) {
  out << "node_id,phone_id\n";
  for (std::size_t i = 0; i < index.size(); ++i) out << i << ',' << csv::quote_if_needed(index.id_of(i)) << '\n';
}

inline NodeIndex read_node_index(std::istream& in) {
  const auto t = csv::Table::read(in, "node index");
  const auto c_node = t.column("node_id"), c_id = t.column("phone_id");
  std::vector<std::string> ids(t.rows().size());
  std::vector<bool> seen(ids.size(), false);
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto node = csv::parse_int<std::size_t>(t.cell(r, c_node));
    if (!node || *node >= ids.size() || seen[*node]) throw RowError(t.line_number(r), "bad node_id");
    seen[*node] = true;
    ids[*node] = std::string(t.cell(r, c_id));
  }
  return NodeIndex(std::move(ids));
}

inline CallGraph read_graph(std::istream& edges, std::istream& nodes, GraphMode mode) {
  NodeIndex index = read_node_index(nodes);
  const auto t = csv::Table::read(edges, "edge list");
  const auto c_src = t.column("src"), c_dst = t.column("dst"), c_w = t.column("weight");
  std::vector<WeightedEdge> list;
  list.reserve(t.rows().size());
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto s = csv::parse_int<NodeId>(t.cell(r, c_src));
    auto d = csv::parse_int<NodeId>(t.cell(r, c_dst));
    auto w = csv::parse_double(t.cell(r, c_w));
    if (!s || !d || !w) throw RowError(t.line_number(r), "malformed edge");
    list.push_back({*s, *d, *w});
  }
  return CallGraph::from_edges(std::move(index), list, mode);
}

// ---------------------------------------------------------------------------
// Node labels

// Per-node labels for one timeframe. Delinquency (0..3, 3 meaning three or
// more late payments) exists only for bank customers; -1 marks telco-only nodes.
struct NodeLabelSet {
  std::vector<std::int8_t> delinquency;
  std::vector<std::uint8_t> is_subject;
  std::vector<std::uint8_t> is_bank_customer;

  std::size_t size() const { return delinquency.size(); }
  std::optional<int> level(NodeId v) const {
    const int d = delinquency.at(v);
    if (d < 0) return std::nullopt;
    return d;
  }

  static NodeLabelSet unlabeled(std::size_t n) {
    return {std::vector<std::int8_t>(n, -1), std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)};
  }
};

// Labels the nodes of a timeframe whose subjects received their card in
// `card_month`. Delinquency counts late payments observed before that month;
// account holders without a card count as observed good customers.
inline NodeLabelSet label_nodes(const NodeIndex& index, const BankData& bank, YearMonth card_month) {
  NodeLabelSet labels = NodeLabelSet::unlabeled(index.size());
  for (const auto& id : bank.customer_ids) {
    if (auto v = index.find(id)) {
      labels.is_bank_customer[*v] = 1;
      labels.delinquency[*v] = 0;
    }
  }
  for (const auto& rec : bank.records) {
    auto v = index.find(rec.customer_id);
    if (!v) continue;
    labels.delinquency[*v] = static_cast<std::int8_t>(std::min(3, rec.late_payments_before(card_month)));
    if (rec.issue_month() == card_month) labels.is_subject[*v] = 1;
  }
  return labels;
}

inline void write_labels(std::ostream& out, const NodeIndex& index, const NodeLabelSet& labels) {
  out << "phone_id,delinquency,is_subject,is_bank_customer\n";
  for (std::size_t v = 0; v < index.size(); ++v) {
    out << csv::quote_if_needed(index.id_of(v)) << ',';
    if (labels.delinquency[v] < 0) out << "NA";
    else out << static_cast<int>(labels.delinquency[v]);
    out << ',' << int(labels.is_subject[v]) << ',' << int(labels.is_bank_customer[v]) << '\n';
  }
}

inline NodeLabelSet read_labels(std::istream& in, const NodeIndex& index) {
  const auto t = csv::Table::read(in, "labels");
  const auto c_id = t.column("phone_id"), c_d = t.column("delinquency");
  const auto c_s = t.column("is_subject"), c_b = t.column("is_bank_customer");
  NodeLabelSet labels = NodeLabelSet::unlabeled(index.size());
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto v = index.find(std::string(t.cell(r, c_id)));
    if (!v) continue;
    auto d = t.cell(r, c_d);
    if (d != "NA" && !d.empty()) {
      auto level = csv::parse_int<int>(d);
      if (!level || *level < 0 || *level > 3) throw RowError(t.line_number(r), "delinquency must be 0..3 or NA");
      labels.delinquency[*v] = static_cast<std::int8_t>(*level);
    }
    labels.is_subject[*v] = t.cell(r, c_s) == "1";
    labels.is_bank_customer[*v] = t.cell(r, c_b) == "1";
    if (labels.is_subject[*v] && !labels.is_bank_customer[*v])
      throw RowError(t.line_number(r), "subject must be a bank customer");
  }
  return labels;
}

}  // namespace cdrscore
