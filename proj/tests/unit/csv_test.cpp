#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "pgp/csv.hpp"
#include "pgp/error.hpp"
#include "support.hpp"

namespace pgp::csv {
namespace {

std::vector<std::string> fields_of(std::string_view line, bool expect_ok = true) {
  std::vector<std::string> f;
  EXPECT_EQ(split(line, f), expect_ok) << line;
  return f;
}

TEST(Split, Plain) {
  EXPECT_EQ(fields_of("a,b,c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(fields_of(""), (std::vector<std::string>{""}));
  EXPECT_EQ(fields_of("a,,"), (std::vector<std::string>{"a", "", ""}));
}

TEST(Split, Quotes) {
  EXPECT_EQ(fields_of("1,\"Beta, The (2001)\",Drama"),
            (std::vector<std::string>{"1", "Beta, The (2001)", "Drama"}));
  EXPECT_EQ(fields_of("\"say \"\"hi\"\"\",x"), (std::vector<std::string>{"say \"hi\"", "x"}));
  fields_of("\"open,x", false);
}

TEST(Format, RoundTripsExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(parse_double(format(v)), v);
  }
  EXPECT_EQ(format(0.5), "0.5");
  EXPECT_EQ(format(3.0), "3");
  EXPECT_TRUE(std::isnan(parse_double(format(std::nan("")))));
  EXPECT_EQ(parse_double(format(-std::numeric_limits<double>::infinity())),
            -std::numeric_limits<double>::infinity());
}

TEST(Parse, RejectsGarbage) {
  EXPECT_THROW(parse_double("1.5x"), IoError);
  EXPECT_THROW(parse_double(""), IoError);
  EXPECT_THROW(parse_int("4.0"), IoError);
  EXPECT_EQ(parse_int("-12"), -12);
}

TEST(Reader, BomCrlfAndBlankLines) {
  const auto dir = testing::scratch_dir("csv_reader");
  {
    std::ofstream out(dir / "t.csv", std::ios::binary);
    out << "\xEF\xBB\xBF" "id,name\r\n1,a\r\n\r\n2,\"b,c\"\r\n";
  }
  const Table t = read_table(dir / "t.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"id", "name"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "b,c");
  EXPECT_EQ(t.column("name"), 1u);
  EXPECT_THROW(t.column("nope"), IoError);
}

TEST(Reader, ShortRecordThrows) {
  const auto dir = testing::scratch_dir("csv_short");
  {
    std::ofstream out(dir / "t.csv");
    out << "a,b\n1\n";
  }
  EXPECT_THROW(read_table(dir / "t.csv"), IoError);
  EXPECT_THROW(read_table(dir / "missing.csv"), IoError);
}

}  // namespace
}  // namespace pgp::csv
