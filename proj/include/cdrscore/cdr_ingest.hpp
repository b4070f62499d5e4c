#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdrscore/calendar.hpp"
#include "cdrscore/csv.hpp"
#include "cdrscore/error.hpp"

namespace cdrscore {

// One logged phone call. Identities are opaque strings (encrypted upstream).
struct CdrRecord {
  Date start_date;
  TimeOfDay start_time;
  std::int64_t duration = 0;  // seconds
  std::string from_id;
  std::string to_id;

  friend bool operator==(const CdrRecord&, const CdrRecord&) = default;
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;
  std::size_t rows_filtered_short = 0;
  std::size_t distinct_ids = 0;

  std::size_t rows_accepted() const { return rows_read - rows_rejected - rows_filtered_short; }
};

struct Rejection {
  std::size_t row;
  std::string reason;
};

struct CdrIngestOptions {
  std::int64_t min_duration = 5;  // seconds; shorter calls are discarded
  char delimiter = ',';
};

struct CdrIngestResult {
  std::vector<CdrRecord> records;
  IngestStats stats;
  std::vector<Rejection> rejections;
};

// Parses a row in the order date, time, duration, caller, callee.
// Throws RowError naming `row` on any malformed field.
inline CdrRecord parse_cdr_line(std::string_view line, char delimiter = ',', std::size_t row = 0) {
  const auto fields = csv::split(line, delimiter);
  if (fields.size() != 5)
    throw RowError(row, "expected 5 fields, found " + std::to_string(fields.size()));
  auto date = calendar::parse_cdr_date(fields[0]);
  if (!date) throw RowError(row, "invalid date '" + fields[0] + "'");
  auto time = calendar::parse_time(fields[1]);
  if (!time) throw RowError(row, "invalid time '" + fields[1] + "'");
  auto duration = csv::parse_int<std::int64_t>(fields[2]);
  if (!duration) throw RowError(row, "non-numeric duration '" + fields[2] + "'");
  if (*duration < 0) throw RowError(row, "negative duration");
  CdrRecord rec{*date, *time, *duration, std::string(csv::trim(fields[3])),
                std::string(csv::trim(fields[4]))};
  if (rec.from_id.empty() || rec.to_id.empty()) throw RowError(row, "empty identity");
  if (rec.from_id == rec.to_id) throw RowError(row, "self-call");
  return rec;
}

inline std::string format_cdr_line(const CdrRecord& r, char delimiter = ',') {
  std::string out = calendar::format_cdr_date(r.start_date);
  out += delimiter;
  out += calendar::format_time(r.start_time);
  out += delimiter;
  out += std::to_string(r.duration);
  out += delimiter;
  out += csv::quote_if_needed(r.from_id, delimiter);
  out += delimiter;
  out += csv::quote_if_needed(r.to_id, delimiter);
  return out;
}

namespace detail {
// A header row starts with a letter; CDR dates start with a digit.
inline bool looks_like_header(std::string_view line) {
  line = csv::trim(line);
  return !line.empty() && std::isalpha(static_cast<unsigned char>(line.front()));
}
}  // namespace detail

// Streams rows from `in`. Every non-blank row is accounted for in the stats:
// accepted, rejected (logged with its reason) or filtered as too short.
inline CdrIngestResult ingest_cdr(std::istream& in, const CdrIngestOptions& options = {}) {
  if (options.min_duration < 0) throw UsageError("min_duration must be >= 0");
  CdrIngestResult result;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (csv::is_blank(line)) continue;
    if (first) {
      first = false;
      if (detail::looks_like_header(line)) continue;
    }
    ++result.stats.rows_read;
    try {
      CdrRecord rec = parse_cdr_line(line, options.delimiter, row);
      if (rec.duration < options.min_duration) {
        ++result.stats.rows_filtered_short;
        continue;
      }
      ids.insert(rec.from_id);
      ids.insert(rec.to_id);
      result.records.push_back(std::move(rec));
    } catch (const RowError& e) {
      ++result.stats.rows_rejected;
      result.rejections.push_back({e.row(), e.reason()});
    }
  }
  if (in.bad()) throw DataError("CDR source unreadable");
  result.stats.distinct_ids = ids.size();
  return result;
}

inline CdrIngestResult ingest_cdr_file(const std::string& path, const CdrIngestOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CDR file " + path);
  return ingest_cdr(in, options);
}

inline void write_rejection_log(std::ostream& out, const std::vector<Rejection>& rejections) {
  for (const auto& r : rejections) out << "row " << r.row << ": " << r.reason << '\n';
}

// ---------------------------------------------------------------------------
// Bank data

struct Sociodemographics {
  std::optional<double> age;
  std::optional<std::string> marital_status;
  std::optional<std::string> postcode;
};

struct DebitTransaction {
  Date date;
  double amount = 0.0;
};

inline constexpr int kCardMonths = 12;

// A bank customer holding a credit card. Monthly entry k describes the k-th
// calendar month after the issue month.
struct BankRecord {
  std::string customer_id;
  Sociodemographics sociodemographics;
  std::vector<DebitTransaction> debit_transactions;
  Date card_issue_date;
  double credit_limit = 0.0;
  std::array<double, kCardMonths> monthly_drawn{};
  std::array<bool, kCardMonths> monthly_arrears{};

  YearMonth issue_month() const { return calendar::year_month_of(card_issue_date); }
  YearMonth statement_month(int k) const { return calendar::add_months(issue_month(), k + 1); }

  int late_payments() const {
    return static_cast<int>(std::count(monthly_arrears.begin(), monthly_arrears.end(), true));
  }
  // Basel default: three or more late payments within twelve months.
  bool is_default() const { return late_payments() >= 3; }

  // Late payments in statement months strictly before `month`.
  int late_payments_before(YearMonth month) const {
    int n = 0;
    for (int k = 0; k < kCardMonths; ++k)
      if (monthly_arrears[k] && statement_month(k) < month) ++n;
    return n;
  }

  // Amount drawn in the month default was reached (third late payment); 0 otherwise.
  double exposure_at_default() const {
    int seen = 0;
    for (int k = 0; k < kCardMonths; ++k) {
      if (monthly_arrears[k] && ++seen == 3) return monthly_drawn[k];
    }
    return 0.0;
  }
};

struct BankIngestStats {
  std::size_t accounts = 0;
  std::size_t transactions = 0;
  std::size_t card_rows = 0;
  std::size_t orphan_transactions = 0;
  std::size_t orphan_cards = 0;
  std::size_t excluded_no_card = 0;
};

struct BankData {
  std::vector<BankRecord> records;          // sorted by customer_id
  std::vector<std::string> customer_ids;    // every account holder, sorted
  BankIngestStats stats;
  std::vector<std::string> issues;

  const BankRecord* find(const std::string& id) const {
    auto it = std::lower_bound(records.begin(), records.end(), id,
                               [](const BankRecord& r, const std::string& k) { return r.customer_id < k; });
    return it != records.end() && it->customer_id == id ? &*it : nullptr;
  }
};

namespace detail {

inline std::optional<double> optional_number(std::string_view cell, std::size_t row, const char* what) {
  if (cell.empty() || cell == "NA") return std::nullopt;
  auto v = csv::parse_double(cell);
  if (!v) throw RowError(row, std::string("invalid ") + what + " '" + std::string(cell) + "'");
  return v;
}

inline double required_number(std::string_view cell, std::size_t row, const char* what) {
  auto v = csv::parse_double(cell);
  if (!v) throw RowError(row, std::string("invalid ") + what + " '" + std::string(cell) + "'");
  return *v;
}

inline Date required_date(std::string_view cell, std::size_t row, const char* what) {
  auto d = calendar::parse_iso_date(cell);
  if (!d) throw RowError(row, std::string("invalid ") + what + " '" + std::string(cell) + "'");
  return *d;
}

}  // namespace detail

// Joins accounts (customer_id, age, marital_status, postcode), debit transactions
// (customer_id, date, amount) and card activity (customer_id, issue_date,
// credit_limit, drawn_1..drawn_12, arrears_1..arrears_12). All three carry a header.
inline BankData ingest_bank(std::istream& accounts, std::istream& transactions, std::istream& card_activity,
                            char delimiter = ',') {
  BankData data;
  const auto acc = csv::Table::read(accounts, "accounts", delimiter);
  const auto tx = csv::Table::read(transactions, "transactions", delimiter);
  const auto cards = csv::Table::read(card_activity, "card activity", delimiter);

  std::map<std::string, Sociodemographics> socio;
  {
    const auto c_id = acc.column("customer_id");
    const auto c_age = acc.column("age");
    const auto c_mar = acc.column("marital_status");
    const auto c_post = acc.column("postcode");
    for (std::size_t r = 0; r < acc.rows().size(); ++r) {
      const std::size_t line = acc.line_number(r);
      std::string id(acc.cell(r, c_id));
      if (id.empty()) throw RowError(line, "accounts: empty customer_id");
      Sociodemographics sd;
      sd.age = detail::optional_number(acc.cell(r, c_age), line, "age");
      if (auto m = acc.cell(r, c_mar); !m.empty() && m != "NA") sd.marital_status = std::string(m);
      if (auto p = acc.cell(r, c_post); !p.empty() && p != "NA") sd.postcode = std::string(p);
      if (!socio.emplace(id, std::move(sd)).second)
        throw DataError("accounts: duplicate customer_id '" + id + "'");
    }
    data.stats.accounts = socio.size();
  }

  std::map<std::string, BankRecord> by_id;
  {
    const auto c_id = cards.column("customer_id");
    const auto c_issue = cards.column("issue_date");
    const auto c_limit = cards.column("credit_limit");
    std::array<std::size_t, kCardMonths> c_drawn{}, c_arrears{};
    for (int k = 0; k < kCardMonths; ++k) {
      c_drawn[k] = cards.column("drawn_" + std::to_string(k + 1));
      c_arrears[k] = cards.column("arrears_" + std::to_string(k + 1));
    }
    for (std::size_t r = 0; r < cards.rows().size(); ++r) {
      const std::size_t line = cards.line_number(r);
      ++data.stats.card_rows;
      std::string id(cards.cell(r, c_id));
      auto s = socio.find(id);
      if (s == socio.end()) {
        ++data.stats.orphan_cards;
        data.issues.push_back("card activity row " + std::to_string(line) + ": no account for '" + id + "'");
        continue;
      }
      BankRecord rec;
      rec.customer_id = id;
      rec.sociodemographics = s->second;
      rec.card_issue_date = detail::required_date(cards.cell(r, c_issue), line, "issue_date");
      rec.credit_limit = detail::required_number(cards.cell(r, c_limit), line, "credit_limit");
      if (!(rec.credit_limit > 0)) throw RowError(line, "credit_limit must be positive");
      for (int k = 0; k < kCardMonths; ++k) {
        rec.monthly_drawn[k] = detail::required_number(cards.cell(r, c_drawn[k]), line, "drawn amount");
        if (rec.monthly_drawn[k] < 0 || rec.monthly_drawn[k] > rec.credit_limit)
          throw RowError(line, "drawn amount outside [0, credit_limit] in month " + std::to_string(k + 1));
        auto flag = csv::parse_int<int>(cards.cell(r, c_arrears[k]));
        if (!flag || (*flag != 0 && *flag != 1)) throw RowError(line, "arrears flag must be 0 or 1");
        rec.monthly_arrears[k] = *flag == 1;
      }
      if (!by_id.emplace(id, std::move(rec)).second)
        throw DataError("card activity: duplicate customer_id '" + id + "'");
    }
  }

  {
    const auto c_id = tx.column("customer_id");
    const auto c_date = tx.column("date");
    const auto c_amount = tx.column("amount");
    for (std::size_t r = 0; r < tx.rows().size(); ++r) {
      const std::size_t line = tx.line_number(r);
      ++data.stats.transactions;
      std::string id(tx.cell(r, c_id));
      if (!socio.count(id)) {
        ++data.stats.orphan_transactions;
        data.issues.push_back("transaction row " + std::to_string(line) + ": no account for '" + id + "'");
        continue;
      }
      DebitTransaction t{detail::required_date(tx.cell(r, c_date), line, "date"),
                         detail::required_number(tx.cell(r, c_amount), line, "amount")};
      if (auto it = by_id.find(id); it != by_id.end()) it->second.debit_transactions.push_back(t);
    }
  }

  data.customer_ids.reserve(socio.size());
  for (const auto& [id, sd] : socio) {
    data.customer_ids.push_back(id);
    if (!by_id.count(id)) ++data.stats.excluded_no_card;
  }
  data.records.reserve(by_id.size());
  for (auto& [id, rec] : by_id) data.records.push_back(std::move(rec));
  return data;
}

inline BankData ingest_bank_files(const std::string& accounts, const std::string& transactions,
                                  const std::string& cards, char delimiter = ',') {
  std::ifstream a(accounts), t(transactions), c(cards);
  if (!a) throw DataError("cannot open accounts file " + accounts);
  if (!t) throw DataError("cannot open transactions file " + transactions);
  if (!c) throw DataError("cannot open card activity file " + cards);
  return ingest_bank(a, t, c, delimiter);
}

}  // namespace cdrscore
