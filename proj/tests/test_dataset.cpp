#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "dexpl/dataset.hpp"

using namespace dexpl;

TEST_CASE("parse_dataset reads a well-formed file") {
  std::stringstream ss("a,b\n1,2\n3,4\n5,6\n");
  const DataTable t = parse_dataset(ss);
  CHECK(t.names == std::vector<std::string>{"a", "b"});
  REQUIRE(t.values.rows == 3);
  REQUIRE(t.values.cols == 2);
  CHECK(t.values(0, 0) == 1.0);
  CHECK(t.values(2, 1) == 6.0);
}

TEST_CASE("parse_dataset names the offending cell") {
  std::stringstream ss("age,income\n33,50000\nNA,62000\n");
  try {
    parse_dataset(ss);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("\"age\"") != std::string::npos);
  }
}

TEST_CASE("parse_dataset rejects non-finite cells and ragged rows") {
  {
    std::stringstream ss("a\nnan\n");
    CHECK_THROWS_AS(parse_dataset(ss), ParseError);
  }
  {
    std::stringstream ss("a,b\n1,2,3\n");
    CHECK_THROWS_AS(parse_dataset(ss), ParseError);
  }
  {
    std::stringstream ss("");
    CHECK_THROWS_AS(parse_dataset(ss), ParseError);
  }
}

TEST_CASE("header-only files give an empty matrix with names") {
  std::stringstream ss("x1,x2,x3\n");
  const DataTable t = parse_dataset(ss);
  CHECK(t.names.size() == 3);
  CHECK(t.values.rows == 0);
  CHECK(t.values.cols == 3);
}

TEST_CASE("standardize produces zero mean and unit deviation") {
  Matrix m(3, 1);
  m(0, 0) = 1.0;
  m(1, 0) = 2.0;
  m(2, 0) = 3.0;
  const auto [out, stats] = standardize(m);
  CHECK(out(0, 0) == Catch::Approx(-1.2247448713915889).epsilon(1e-12));
  CHECK(out(1, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(out(2, 0) == Catch::Approx(1.2247448713915889).epsilon(1e-12));
  CHECK(stats.means[0] == 2.0);
  CHECK(stats.stds[0] == Catch::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));

  double mean = 0.0, ss = 0.0;
  for (std::size_t r = 0; r < 3; ++r) mean += out(r, 0);
  mean /= 3.0;
  for (std::size_t r = 0; r < 3; ++r) ss += out(r, 0) * out(r, 0);
  CHECK(std::abs(mean) <= 1e-12);
  CHECK(std::sqrt(ss / 3.0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("standardize with loaded identity stats leaves data unchanged") {
  Matrix m(2, 2);
  m(0, 0) = 0.5;
  m(0, 1) = -1.5;
  m(1, 0) = 2.0;
  m(1, 1) = 0.0;
  StandardizationStats identity;
  identity.source = StandardizationStats::Source::loaded;
  identity.means = {0.0, 0.0};
  identity.stds = {1.0, 1.0};
  const auto [out, stats] = standardize(m, identity);
  CHECK(out.data == m.data);
  CHECK(stats.source == StandardizationStats::Source::loaded);
}

TEST_CASE("constant columns are rejected") {
  Matrix m(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    m(r, 0) = static_cast<double>(r);
    m(r, 1) = 7.0;
  }
  try {
    standardize(m);
    FAIL("expected ZeroVariance");
  } catch (const ZeroVariance& e) {
    CHECK(e.column() == 1);
  }
}

TEST_CASE("sample deviation uses the n-1 denominator") {
  Matrix m(3, 1);
  m(0, 0) = 1.0;
  m(1, 0) = 2.0;
  m(2, 0) = 3.0;
  const StandardizationStats stats = compute_stats(m, /*population=*/false);
  CHECK(stats.stds[0] == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("stats sidecar round-trips") {
  std::stringstream ss("mean,std\n1.5,2.0\n-0.25,0.5\n");
  const StandardizationStats stats = parse_stats(ss);
  REQUIRE(stats.means.size() == 2);
  CHECK(stats.means[1] == -0.25);
  CHECK(stats.stds[0] == 2.0);
  CHECK(stats.source == StandardizationStats::Source::loaded);

  std::stringstream bad_header("avg,std\n1,1\n");
  CHECK_THROWS_AS(parse_stats(bad_header), ParseError);
  std::stringstream bad_sd("mean,std\n1,0\n");
  CHECK_THROWS_AS(parse_stats(bad_sd), ZeroVariance);
}
