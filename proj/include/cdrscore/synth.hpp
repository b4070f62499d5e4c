#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cdrscore/calendar.hpp"
#include "cdrscore/call_graph.hpp"
#include "cdrscore/cdr_ingest.hpp"
#include "cdrscore/error.hpp"
#include "cdrscore/random.hpp"

namespace cdrscore {

enum class DegreeModel { power_law, poisson };

struct SynthConfig {
  std::size_t n_nodes = 100000;
  std::size_t n_subjects = 20000;
  std::size_t n_calls = 1000000;
  int months = 5;  // CDR months; subjects get cards in the last months - 2 cohorts
  YearMonth start{std::chrono::year{2015}, std::chrono::month{1}};
  double default_rate = 0.0449;
  double homophily_strength = 4.0;  // cross-class edges are kept with probability 1/strength
  DegreeModel degree = DegreeModel::power_law;
  double degree_exponent = 2.5;
  double degree_cutoff = 150.0;  // largest expected-degree weight
  double calls_per_edge = 3.0;
  double risky_share = 0.15;
  double bank_share = 0.5;  // nodes holding a bank account
  std::size_t n_prior_cards = 15000;
  double planted_feature_effect = 1.0;
  // default log-odds per unit of risky class, latent trait, share of delinquent card-holding contacts
  double beta_risky = 2.6;
  double beta_latent = 0.95;
  double beta_neighbors = 2.2;
  double short_call_share = 0.05;
  std::uint64_t seed = 1;

  int cohorts() const { return months - 2; }
  std::size_t n_accounts() const {
    return static_cast<std::size_t>(std::llround(bank_share * static_cast<double>(n_nodes)));
  }
  YearMonth card_month(int cohort) const { return calendar::add_months(start, 3 + cohort); }

  void validate() const {
    if (n_nodes < 10) throw UsageError("synth: need at least 10 nodes");
    if (months < 3) throw UsageError("synth: need at least 3 months of calls");
    if (!(default_rate > 0 && default_rate < 1)) throw UsageError("synth: default_rate must lie in (0,1)");
    if (!(homophily_strength >= 1)) throw UsageError("synth: homophily_strength must be >= 1");
    if (!(risky_share > 0 && risky_share < 1)) throw UsageError("synth: risky_share must lie in (0,1)");
    if (!(bank_share > 0 && bank_share <= 1)) throw UsageError("synth: bank_share must lie in (0,1]");
    if (degree == DegreeModel::power_law && !(degree_exponent > 1)) throw UsageError("synth: degree exponent must exceed 1");
    if (!(degree_cutoff >= 1)) throw UsageError("synth: degree cutoff must be >= 1");
    if (!(calls_per_edge >= 1)) throw UsageError("synth: calls_per_edge must be >= 1");
    if (!(short_call_share >= 0 && short_call_share < 1)) throw UsageError("synth: short_call_share must lie in [0,1)");
    if (n_subjects > n_nodes) throw UsageError("synth: n_subjects exceeds n_nodes");
    if (n_subjects + n_prior_cards > n_accounts())
      throw UsageError("synth: subjects plus prior card holders exceed the number of bank accounts (" +
                       std::to_string(n_accounts()) + ")");
    if (n_calls < n_nodes) throw UsageError("synth: need at least one call per node");
  }
};

enum class NodeRole : std::uint8_t { telco_only, account_only, prior_card, subject };

struct SynthNetwork {
  std::vector<std::uint8_t> risky;
  std::vector<double> latent;          // standard normal trait behind the bank-side features
  std::vector<WeightedEdge> edges;     // distinct undirected pairs, weight = number of calls
  std::vector<std::uint8_t> anchor;    // per edge: 1 when it is a node's guaranteed first edge
};

struct SynthWorld {
  SynthConfig config;
  SynthNetwork network;
  std::vector<std::string> phone_ids;
  std::vector<NodeRole> role;
  std::vector<int> cohort;  // -1 for non-subjects
  std::vector<double> default_probability;
  std::vector<CdrRecord> calls;
  std::vector<std::pair<std::string, Sociodemographics>> accounts;  // by node order
  std::vector<BankRecord> cards;
  std::vector<std::size_t> card_node;  // node of each card record
};

inline std::string synth_phone_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "(%03zu) 555-%04zu", 200 + i / 10000, i % 10000);
  return buf;
}

// Latent classes and the call pairs. Every node gets one guaranteed edge,
// the rest follow expected-degree sampling; cross-class pairs are kept with
// probability 1/homophily_strength.
inline SynthNetwork generate_network(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_nodes;
  SynthNetwork net;
  net.risky.resize(n);
  net.latent.resize(n);
  {
    auto eng = make_engine(cfg.seed, "latent");
    std::normal_distribution<double> z;
    for (std::size_t i = 0; i < n; ++i) {
      net.risky[i] = uniform01(eng) < cfg.risky_share;
      net.latent[i] = z(eng);
    }
  }
  std::vector<double> theta(n, 1.0);
  if (cfg.degree == DegreeModel::power_law) {
    auto eng = make_engine(cfg.seed, "degree");
    for (auto& t : theta) t = std::min(cfg.degree_cutoff, std::pow(1.0 - uniform01(eng), -1.0 / (cfg.degree_exponent - 1.0)));
  }
  std::discrete_distribution<std::size_t> endpoint(theta.begin(), theta.end());
  auto eng = make_engine(cfg.seed, "edges");
  const double keep_cross = 1.0 / cfg.homophily_strength;
  auto accept = [&](std::size_t u, std::size_t v) {
    if (u == v) return false;
    return net.risky[u] == net.risky[v] || uniform01(eng) < keep_cross;
  };

  const auto n_edges =
      std::max(n, static_cast<std::size_t>(static_cast<double>(cfg.n_calls) / cfg.calls_per_edge));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(n_edges);
  std::vector<std::uint8_t> anchor;
  anchor.reserve(n_edges);
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t v;
    do v = endpoint(eng);
    while (!accept(u, v));
    pairs.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    anchor.push_back(1);
  }
  while (pairs.size() < n_edges) {
    const std::size_t u = endpoint(eng), v = endpoint(eng);
    if (!accept(u, v)) continue;
    pairs.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    anchor.push_back(0);
  }
  // one call per pair, the rest spread uniformly
  std::vector<std::uint32_t> calls(pairs.size(), 1);
  {
    auto ceng = make_engine(cfg.seed, "call-counts");
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    for (std::size_t k = pairs.size(); k < cfg.n_calls; ++k) ++calls[pick(ceng)];
  }
  net.edges.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k)
    net.edges.push_back({pairs[k].first, pairs[k].second, static_cast<double>(calls[k])});
  net.anchor = std::move(anchor);
  return net;
}

namespace detail {

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Arrears flags over the 12 statement months: defaulters get a run of 3 to 6
// consecutive late payments, others 0, 1 or 2 scattered ones.
inline std::array<bool, kCardMonths> draw_arrears(bool defaults, Engine& eng) {
  std::array<bool, kCardMonths> a{};
  if (defaults) {
    const int start = std::uniform_int_distribution<int>(0, 8)(eng);
    const int len = std::uniform_int_distribution<int>(3, std::min(6, kCardMonths - start))(eng);
    for (int k = start; k < start + len; ++k) a[k] = true;
    return a;
  }
  const double u = uniform01(eng);
  const int late = u < 0.8 ? 0 : (u < 0.93 ? 1 : 2);
  for (int placed = 0; placed < late;) {
    const int k = std::uniform_int_distribution<int>(0, kCardMonths - 1)(eng);
    if (!a[k]) {
      a[k] = true;
      ++placed;
    }
  }
  return a;
}

inline double cents(double x) { return std::round(x * 100.0) / 100.0; }

inline Date random_day(YearMonth ym, Engine& eng) {
  const int d = std::uniform_int_distribution<int>(0, calendar::days_in(ym) - 1)(eng);
  return calendar::first_day(ym) + std::chrono::days{d};
}

}  // namespace detail

// Full synthetic world: call records, bank accounts, card histories and the
// ground truth behind them.
inline SynthWorld generate_world(const SynthConfig& cfg) {
  SynthWorld w;
  w.config = cfg;
  w.network = generate_network(cfg);
  const auto& net = w.network;
  const std::size_t n = cfg.n_nodes;
  const int cohorts = cfg.cohorts();
  w.phone_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) w.phone_ids.push_back(synth_phone_id(i));

  // roles
  w.role.assign(n, NodeRole::telco_only);
  w.cohort.assign(n, -1);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto eng = make_engine(cfg.seed, "roles");
    std::shuffle(order.begin(), order.end(), eng);
    const std::size_t n_acc = cfg.n_accounts();
    for (std::size_t k = 0; k < n_acc; ++k) {
      const auto v = order[k];
      if (k < cfg.n_subjects) {
        w.role[v] = NodeRole::subject;
        w.cohort[v] = static_cast<int>(k % static_cast<std::size_t>(cohorts));
      } else if (k < cfg.n_subjects + cfg.n_prior_cards) {
        w.role[v] = NodeRole::prior_card;
      } else {
        w.role[v] = NodeRole::account_only;
      }
    }
  }

  // sociodemographics for every account holder
  auto seng = make_engine(cfg.seed, "sociodemographics");
  std::normal_distribution<double> noise;
  for (std::size_t v = 0; v < n; ++v) {
    if (w.role[v] == NodeRole::telco_only) continue;
    const double g = net.latent[v];
    Sociodemographics sd;
    if (uniform01(seng) >= 0.02) sd.age = std::clamp(std::round(40.0 - 6.0 * g + 9.0 * noise(seng)), 18.0, 85.0);
    if (uniform01(seng) >= 0.02) {
      const double married = detail::logistic(0.2 - 0.7 * g);
      const double u = uniform01(seng);
      sd.marital_status = u < married ? "married" : (u < married + (1 - married) * 0.6 ? "single"
                                                      : (u < married + (1 - married) * 0.9 ? "divorced" : "widowed"));
    }
    char pc[8];
    std::snprintf(pc, sizeof pc, "%04d", std::uniform_int_distribution<int>(0, 9999)(seng));
    sd.postcode = pc;
    w.accounts.emplace_back(w.phone_ids[v], std::move(sd));
  }

  // prior card holders: issued before the first cohort, risk driven by class
  auto beng = make_engine(cfg.seed, "cards");
  const YearMonth first_prior = calendar::add_months(cfg.start, -12);
  const int prior_span = calendar::months_between(first_prior, calendar::add_months(cfg.start, 2));
  auto make_card = [&](std::size_t v, YearMonth issue, bool defaults) {
    BankRecord r;
    r.customer_id = w.phone_ids[v];
    r.card_issue_date = detail::random_day(issue, beng);
    static constexpr double kLimits[] = {500, 1000, 1500, 2000, 3000, 5000};
    r.credit_limit = kLimits[std::uniform_int_distribution<int>(0, 5)(beng)];
    r.monthly_arrears = detail::draw_arrears(defaults, beng);
    for (int k = 0; k < kCardMonths; ++k)
      r.monthly_drawn[k] = detail::cents(r.credit_limit * (0.05 + 0.85 * uniform01(beng)));
    if (defaults) {
      int seen = 0;
      for (int k = 0; k < kCardMonths; ++k)
        if (r.monthly_arrears[k] && ++seen == 3) {
          const double u = uniform01(beng);
          r.monthly_drawn[k] = u < 0.45 ? 0.0 : (u < 0.65 ? r.credit_limit : detail::cents(r.credit_limit * uniform01(beng)));
        }
    }
    // a month of debit activity before issue
    const double g = net.latent[v];
    const auto before = calendar::add_months(r.issue_month(), -1);
    const int count = std::poisson_distribution<int>(std::max(1.0, 12.0 - 3.0 * g))(beng);
    const double weekend_bias = std::clamp(0.28 + 0.08 * g, 0.05, 0.9);
    std::lognormal_distribution<double> amount(std::log(35.0) - 0.3 * g, 0.6);
    for (int t = 0; t < count; ++t) {
      Date d = detail::random_day(before, beng);
      const bool want_weekend = uniform01(beng) < weekend_bias;
      for (int tries = 0; tries < 8 && calendar::is_weekend(d) != want_weekend; ++tries) d = detail::random_day(before, beng);
      r.debit_transactions.push_back({d, detail::cents(amount(beng)) + 0.01});
    }
    std::sort(r.debit_transactions.begin(), r.debit_transactions.end(),
              [](const DebitTransaction& a, const DebitTransaction& b) { return a.date < b.date; });
    return r;
  };
  std::vector<int> node_card(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (w.role[v] != NodeRole::prior_card) continue;
    const YearMonth issue = calendar::add_months(first_prior, std::uniform_int_distribution<int>(0, prior_span)(beng));
    const bool defaults = uniform01(beng) < detail::logistic(-2.5 + 2.2 * net.risky[v]);
    node_card[v] = static_cast<int>(w.cards.size());
    w.cards.push_back(make_card(v, issue, defaults));
    w.card_node.push_back(v);
  }

  // subjects: default odds from class, latent trait and delinquent neighbors
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& e : net.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<std::size_t> subjects;
  std::vector<double> score;
  for (std::size_t v = 0; v < n; ++v) {
    if (w.role[v] != NodeRole::subject) continue;
    auto& nb = adj[v];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    const YearMonth month = cfg.card_month(w.cohort[v]);
    // share rather than count, so that default does not track degree
    int delinquent = 0, holders = 0;
    for (auto u : nb) {
      if (node_card[u] < 0) continue;
      ++holders;
      if (w.cards[static_cast<std::size_t>(node_card[u])].late_payments_before(month) >= 1) ++delinquent;
    }
    const double share = holders ? double(delinquent) / double(holders) : 0.0;
    subjects.push_back(v);
    score.push_back(cfg.planted_feature_effect *
                    (cfg.beta_risky * net.risky[v] + cfg.beta_latent * net.latent[v] + cfg.beta_neighbors * share));
  }
  double lo = -30, hi = 30;
  for (int it = 0; it < 200 && !subjects.empty(); ++it) {
    const double mid = (lo + hi) / 2;
    double mean = 0;
    for (double s : score) mean += detail::logistic(mid + s);
    mean /= double(score.size());
    (mean < cfg.default_rate ? lo : hi) = mid;
  }
  const double b0 = (lo + hi) / 2;
  w.default_probability.assign(n, 0.0);
  auto deng = make_engine(cfg.seed, "defaults");
  for (std::size_t k = 0; k < subjects.size(); ++k) {
    const auto v = subjects[k];
    w.default_probability[v] = detail::logistic(b0 + score[k]);
    const bool defaults = uniform01(deng) < w.default_probability[v];
    w.cards.push_back(make_card(v, cfg.card_month(w.cohort[v]), defaults));
    w.card_node.push_back(v);
  }

  // call records
  auto ceng = make_engine(cfg.seed, "calls");
  const Date first = calendar::first_day(cfg.start);
  const Date last = calendar::last_day(calendar::add_months(cfg.start, cfg.months - 1));
  std::vector<Date> weekdays, weekends;
  for (Date d = first; d <= last; d += std::chrono::days{1}) (calendar::is_weekend(d) ? weekends : weekdays).push_back(d);
  auto pick = [&](const std::vector<Date>& days, Date lo_d, Date hi_d) {
    auto b = std::lower_bound(days.begin(), days.end(), lo_d), e = std::upper_bound(days.begin(), days.end(), hi_d);
    return *(b + std::uniform_int_distribution<std::ptrdiff_t>(0, (e - b) - 1)(ceng));
  };
  w.calls.reserve(cfg.n_calls);
  for (std::size_t k = 0; k < net.edges.size(); ++k) {
    const auto& e = net.edges[k];
    // a subject's guaranteed edge carries its first call inside the cohort window
    Date lo_d = first, hi_d = last;
    const std::size_t owner = e.src;
    const bool anchored = net.anchor[k] && w.cohort[owner] >= 0;
    if (anchored) {
      const auto win = calendar::months_before(cfg.card_month(w.cohort[owner]), 3);
      lo_d = win.first;
      hi_d = win.last;
    }
    const int count = static_cast<int>(e.weight);
    for (int c = 0; c < count; ++c) {
      const bool forward = uniform01(ceng) < 0.5;
      const std::size_t caller = forward ? e.src : e.dst, callee = forward ? e.dst : e.src;
      const bool risky = net.risky[caller];
      const Date d0 = c == 0 ? lo_d : first, d1 = c == 0 ? hi_d : last;
      const bool weekend = uniform01(ceng) < (risky ? 0.5 : 0.25);
      const Date d = pick(weekend ? weekends : weekdays, d0, d1);
      const bool night = uniform01(ceng) < (risky ? 0.45 : 0.12);
      int hour = night ? std::uniform_int_distribution<int>(20, 31)(ceng) % 24 : std::uniform_int_distribution<int>(8, 19)(ceng);
      const int sec = hour * 3600 + std::uniform_int_distribution<int>(0, 3599)(ceng);
      std::int64_t duration;
      if (uniform01(ceng) < cfg.short_call_share) {
        duration = std::uniform_int_distribution<int>(0, 4)(ceng);
      } else {
        duration = 5 + static_cast<std::int64_t>(std::exponential_distribution<double>(1.0 / (risky ? 70.0 : 160.0))(ceng));
      }
      w.calls.push_back({d, TimeOfDay{sec}, duration, w.phone_ids[caller], w.phone_ids[callee]});
    }
  }
  std::stable_sort(w.calls.begin(), w.calls.end(), [](const CdrRecord& a, const CdrRecord& b) {
    return a.start_date != b.start_date ? a.start_date < b.start_date : a.start_time < b.start_time;
  });
  return w;
}

inline std::string format_amount(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct SynthPaths {
  std::filesystem::path cdr, accounts, transactions, cards, truth;

  explicit SynthPaths(const std::filesystem::path& dir)
      : cdr(dir / "cdr.csv"),
        accounts(dir / "accounts.csv"),
        transactions(dir / "transactions.csv"),
        cards(dir / "cards.csv"),
        truth(dir / "truth.csv") {}
};

inline void write_dataset(const SynthWorld& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const SynthPaths p(dir);
  auto open = [](const std::filesystem::path& f) {
    std::ofstream out(f, std::ios::binary);
    if (!out) throw DataError("cannot write " + f.string());
    return out;
  };
  {
    auto out = open(p.cdr);
    out << "start_date,start_time,duration,from_id,to_id\n";
    for (const auto& c : w.calls) out << format_cdr_line(c) << '\n';
  }
  {
    auto out = open(p.accounts);
    out << "customer_id,age,marital_status,postcode\n";
    for (const auto& [id, sd] : w.accounts)
      out << id << ',' << (sd.age ? std::to_string(static_cast<int>(*sd.age)) : "NA") << ','
          << sd.marital_status.value_or("NA") << ',' << sd.postcode.value_or("NA") << '\n';
  }
  {
    auto out = open(p.transactions);
    out << "customer_id,date,amount\n";
    for (const auto& c : w.cards)
      for (const auto& t : c.debit_transactions)
        out << c.customer_id << ',' << calendar::format_iso_date(t.date) << ',' << format_amount(t.amount) << '\n';
  }
  {
    auto out = open(p.cards);
    out << "customer_id,issue_date,credit_limit";
    for (int k = 1; k <= kCardMonths; ++k) out << ",drawn_" << k;
    for (int k = 1; k <= kCardMonths; ++k) out << ",arrears_" << k;
    out << '\n';
    for (const auto& c : w.cards) {
      out << c.customer_id << ',' << calendar::format_iso_date(c.card_issue_date) << ',' << format_amount(c.credit_limit);
      for (double d : c.monthly_drawn) out << ',' << format_amount(d);
      for (bool a : c.monthly_arrears) out << ',' << (a ? 1 : 0);
      out << '\n';
    }
  }
  {
    auto out = open(p.truth);
    out << "phone_id,risky,latent,role,cohort,default_probability,is_default\n";
    std::vector<int> card_of(w.phone_ids.size(), -1);
    for (std::size_t k = 0; k < w.cards.size(); ++k) card_of[w.card_node[k]] = static_cast<int>(k);
    static constexpr const char* kRole[] = {"telco", "account", "prior_card", "subject"};
    for (std::size_t v = 0; v < w.phone_ids.size(); ++v) {
      const int c = card_of[v];
      out << w.phone_ids[v] << ',' << int(w.network.risky[v]) << ',' << csv::format_double(w.network.latent[v]) << ','
          << kRole[static_cast<int>(w.role[v])] << ',' << w.cohort[v] << ','
          << csv::format_double(w.default_probability[v]) << ','
          << (c < 0 ? "NA" : (w.cards[static_cast<std::size_t>(c)].is_default() ? "1" : "0")) << '\n';
    }
  }
}

}  // namespace cdrscore
