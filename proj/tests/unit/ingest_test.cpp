#include <cdrscore/cdr_ingest.hpp>
#include <gtest/gtest.h>

#include <sstream>

using namespace cdrscore;

TEST(ParseCdrLine, LogExampleRow) {
  auto r = parse_cdr_line("01MAY2017,14:51:14,715,(202) 555-0116,(701) 555-0191");
  EXPECT_EQ(r.start_date, *calendar::make_date(2017, 5, 1));
  EXPECT_EQ(r.start_time.hour(), 14);
  EXPECT_EQ(r.start_time.minute(), 51);
  EXPECT_EQ(r.start_time.second(), 14);
  EXPECT_EQ(r.duration, 715);
  EXPECT_EQ(r.from_id, "(202) 555-0116");
  EXPECT_EQ(r.to_id, "(701) 555-0191");
}

TEST(ParseCdrLine, ZeroDurationParses) {
  EXPECT_EQ(parse_cdr_line("01MAY2017,14:51:14,0,X,Y").duration, 0);
}

TEST(ParseCdrLine, InvalidTimeRejected) {
  EXPECT_THROW(parse_cdr_line("01MAY2017,25:61:00,10,X,Y"), RowError);
  EXPECT_THROW(parse_cdr_line("01MAY2017,10:00:00,-3,X,Y"), RowError);
  EXPECT_THROW(parse_cdr_line("01MAY2017,10:00:00,3,X"), RowError);
  EXPECT_THROW(parse_cdr_line("01MAY2017,10:00:00,3,X,X"), RowError);
}

TEST(ParseCdrLine, FormatRoundTrip) {
  const std::string line = "01MAY2017,14:51:14,715,(202) 555-0116,(701) 555-0191";
  auto r = parse_cdr_line(line);
  EXPECT_EQ(parse_cdr_line(format_cdr_line(r)), r);
  auto semi = format_cdr_line(r, ';');
  EXPECT_EQ(parse_cdr_line(semi, ';'), r);
}

TEST(IngestCdr, ShortCallsFiltered) {
  std::istringstream in(
      "01MAY2017,10:00:00,4,A,B\n"
      "01MAY2017,10:00:00,5,A,B\n"
      "01MAY2017,10:00:00,715,B,C\n");
  auto res = ingest_cdr(in, {.min_duration = 5});
  EXPECT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.stats.rows_filtered_short, 1u);
  EXPECT_EQ(res.stats.rows_read, 3u);
  EXPECT_EQ(res.stats.distinct_ids, 3u);
}

TEST(IngestCdr, EmptyStream) {
  std::istringstream in("");
  auto res = ingest_cdr(in);
  EXPECT_TRUE(res.records.empty());
  EXPECT_EQ(res.stats.rows_read, 0u);
  EXPECT_EQ(res.stats.rows_rejected, 0u);
  EXPECT_EQ(res.stats.rows_filtered_short, 0u);
}

TEST(IngestCdr, MalformedRowLoggedNotFatal) {
  std::istringstream in(
      "date,time,duration,from,to\n"
      "01MAY2017,10:00:00,60,A,B\n"
      "01MAY2017,xx,60,A,B\n"
      "02MAY2017,11:00:00,60,B,A\n");
  auto res = ingest_cdr(in);
  EXPECT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.stats.rows_rejected, 1u);
  ASSERT_EQ(res.rejections.size(), 1u);
  EXPECT_EQ(res.rejections[0].row, 3u);
}

TEST(IngestCdr, EveryRowAccountedFor) {
  std::ostringstream src;
  for (int i = 0; i < 200; ++i) {
    if (i % 17 == 5) src << "garbage row " << i << "\n";
    else src << "03JUN2016,09:1" << i % 10 << ":00," << i % 12 << ",N" << i % 7 << ",M" << i % 5 << "\n";
  }
  std::istringstream in(src.str());
  auto res = ingest_cdr(in, {.min_duration = 5});
  EXPECT_EQ(res.stats.rows_read, 200u);
  EXPECT_EQ(res.stats.rows_accepted(), res.records.size());
  EXPECT_EQ(res.records.size() + res.stats.rows_rejected + res.stats.rows_filtered_short, 200u);
}

namespace {

std::string card_header() {
  std::string h = "customer_id,issue_date,credit_limit";
  for (int k = 1; k <= 12; ++k) h += ",drawn_" + std::to_string(k);
  for (int k = 1; k <= 12; ++k) h += ",arrears_" + std::to_string(k);
  return h + "\n";
}

std::string card_row(const std::string& id, int late) {
  std::string r = id + ",2015-04-10,1000";
  for (int k = 1; k <= 12; ++k) r += "," + std::to_string(10 * k);
  for (int k = 1; k <= 12; ++k) r += k <= late ? ",1" : ",0";
  return r + "\n";
}

}  // namespace

TEST(IngestBank, JoinsThreeSources) {
  std::istringstream acc("customer_id,age,marital_status,postcode\nc1,41,married,1000\nc2,NA,,\n");
  std::istringstream tx("customer_id,date,amount\nc1,2015-01-03,12.5\nc1,2015-02-04,7\n");
  std::istringstream cards(card_header() + card_row("c1", 3));
  auto bank = ingest_bank(acc, tx, cards);
  ASSERT_EQ(bank.records.size(), 1u);
  const auto& r = bank.records[0];
  EXPECT_EQ(r.debit_transactions.size(), 2u);
  EXPECT_EQ(*r.sociodemographics.age, 41.0);
  EXPECT_TRUE(r.is_default());
  EXPECT_DOUBLE_EQ(r.exposure_at_default(), 30.0);
  EXPECT_EQ(bank.stats.excluded_no_card, 1u);
  EXPECT_EQ(bank.customer_ids.size(), 2u);
  EXPECT_EQ(bank.find("c2"), nullptr);
}

TEST(IngestBank, DuplicateCardRowNamesId) {
  std::istringstream acc("customer_id,age,marital_status,postcode\nc7,30,single,1\n");
  std::istringstream tx("customer_id,date,amount\n");
  std::istringstream cards(card_header() + card_row("c7", 0) + card_row("c7", 1));
  try {
    ingest_bank(acc, tx, cards);
    FAIL() << "expected duplicate error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("c7"), std::string::npos);
  }
}

TEST(BankRecord, LatePaymentsBeforeMonth) {
  BankRecord r;
  r.card_issue_date = *calendar::make_date(2015, 4, 10);
  r.monthly_arrears = {true, false, true, true};
  // statement months are May, Jun, Jul, Aug
  EXPECT_EQ(r.late_payments_before(YearMonth{std::chrono::year{2015}, std::chrono::month{5}}), 0);
  EXPECT_EQ(r.late_payments_before(YearMonth{std::chrono::year{2015}, std::chrono::month{8}}), 2);
  EXPECT_EQ(r.late_payments(), 3);
  EXPECT_FALSE(BankRecord{}.is_default());
}
