#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "dexpl/report.hpp"
#include "support/test_rng.hpp"

using namespace dexpl;

namespace {

DeepAttribution sample_attribution(Vector contributions, double bias, double predicted,
                                   double reference) {
  DeepAttribution a;
  a.feature_contributions = std::move(contributions);
  a.bias_total = bias;
  a.predicted = predicted;
  a.reference_value = reference;
  a.reconstruction_error = 1e-9;
  a.grid_points_used = 64;
  return a;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("ungrouped report has one alphabetical column per feature") {
  const std::vector<std::string> names = {"beta", "alpha"};
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  results.emplace_back(1, sample_attribution({0.25, -0.5}, 0.125, 1.0, 0.5));
  std::ostringstream out;
  emit_decomposition(out, results, names, nullptr, ReportFormat::csv);

  std::istringstream lines(out.str());
  std::string header, row;
  REQUIRE(std::getline(lines, header));
  REQUIRE(std::getline(lines, row));
  CHECK(header ==
        "row,alpha,beta,bias,predicted,reference,prediction_minus_reference,"
        "reconstruction_error,grid_points");
  const auto cells = split_csv_line(row);
  REQUIRE(cells.size() == 9);
  CHECK(cells[0] == "1");
  CHECK(cells[1] == "-0.5");   // alpha
  CHECK(cells[2] == "0.25");   // beta
  CHECK(cells[3] == "0.125");
  CHECK(cells[6] == "0.5");
  CHECK(cells[8] == "64");
}

TEST_CASE("grouping sums member features") {
  const std::vector<std::string> names = {"f1", "f2", "f3"};
  FeatureGrouping grouping;
  grouping.mapping = {{"f1", "A"}, {"f2", "A"}, {"f3", "B"}};
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  results.emplace_back(4, sample_attribution({0.5, 0.25, -1.0}, 0.0, 0.0, 0.0));
  std::ostringstream out;
  emit_decomposition(out, results, names, &grouping, ReportFormat::csv);
  std::istringstream lines(out.str());
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  const auto cells = split_csv_line(row);
  CHECK(split_csv_line(header)[1] == "A");
  CHECK(cells[1] == "0.75");
  CHECK(cells[2] == "-1");
}

TEST_CASE("grouped and ungrouped totals agree") {
  testsupport::Rng rng(5150);
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  FeatureGrouping grouping;
  grouping.mapping = {{"a", "g1"}, {"b", "g2"}, {"c", "g1"}, {"d", "g2"}};
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  for (std::size_t r = 0; r < 5; ++r)
    results.emplace_back(r + 1, sample_attribution(rng.normal_vector(4),
                                                   rng.normal(), rng.normal(), 0.0));

  std::ostringstream grouped, ungrouped;
  emit_decomposition(grouped, results, names, &grouping, ReportFormat::csv);
  emit_decomposition(ungrouped, results, names, nullptr, ReportFormat::csv);

  std::istringstream glines(grouped.str()), ulines(ungrouped.str());
  std::string gline, uline;
  std::getline(glines, gline);
  std::getline(ulines, uline);
  while (std::getline(glines, gline) && std::getline(ulines, uline)) {
    const auto g = split_csv_line(gline);
    const auto u = split_csv_line(uline);
    double gsum = 0.0, usum = 0.0, v = 0.0;
    for (int i = 1; i <= 2; ++i) {
      std::from_chars(g[i].data(), g[i].data() + g[i].size(), v);
      gsum += v;
    }
    for (int i = 1; i <= 4; ++i) {
      std::from_chars(u[i].data(), u[i].data() + u[i].size(), v);
      usum += v;
    }
    REQUIRE(std::abs(gsum - usum) <= 1e-12);
  }
}

TEST_CASE("grouping must cover the features exactly") {
  const std::vector<std::string> names = {"f1", "f2"};
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  results.emplace_back(1, sample_attribution({1.0, 2.0}, 0.0, 3.0, 0.0));
  std::ostringstream out;

  FeatureGrouping unknown;
  unknown.mapping = {{"f1", "A"}, {"f2", "A"}, {"zz", "B"}};
  CHECK_THROWS_WITH(
      emit_decomposition(out, results, names, &unknown, ReportFormat::csv),
      Catch::Matchers::ContainsSubstring("unknown feature")
      || Catch::Matchers::ContainsSubstring("covers"));

  FeatureGrouping missing;
  missing.mapping = {{"f1", "A"}};
  CHECK_THROWS_AS(emit_decomposition(out, results, names, &missing, ReportFormat::csv),
                  Error);
}

TEST_CASE("csv numbers round-trip exactly") {
  testsupport::Rng rng(8080);
  const std::vector<std::string> names = {"x"};
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  for (std::size_t r = 0; r < 20; ++r)
    results.emplace_back(r + 1, sample_attribution({rng.normal() / 3.0}, rng.normal(),
                                                   rng.normal() * 1e-7, 0.0));
  std::ostringstream out;
  emit_decomposition(out, results, names, nullptr, ReportFormat::csv);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);  // header
  std::size_t r = 0;
  while (std::getline(lines, line)) {
    const auto cells = split_csv_line(line);
    double v = 0.0;
    std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), v);
    REQUIRE(v == results[r].second.feature_contributions[0]);
    std::from_chars(cells[3].data(), cells[3].data() + cells[3].size(), v);
    REQUIRE(v == results[r].second.predicted);
    ++r;
  }
  REQUIRE(r == results.size());
}

TEST_CASE("json report carries the same values") {
  const std::vector<std::string> names = {"f1", "f2"};
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  results.emplace_back(3, sample_attribution({0.1, 0.2}, -0.05, 0.75, 0.5));
  std::ostringstream out;
  emit_decomposition(out, results, names, nullptr, ReportFormat::json);
  const auto parsed = nlohmann::json::parse(out.str());
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0]["row"] == 3);
  CHECK(parsed[0]["contributions"]["f1"].get<double>() == 0.1);
  CHECK(parsed[0]["contributions"]["f2"].get<double>() == 0.2);
  CHECK(parsed[0]["bias"].get<double>() == -0.05);
  CHECK(parsed[0]["prediction_minus_reference"].get<double>() == 0.25);
  CHECK(parsed[0]["grid_points"] == 64);
}

TEST_CASE("redistributed shares fold into the contribution columns") {
  const std::vector<std::string> names = {"f1", "f2"};
  DeepAttribution a = sample_attribution({0.1, 0.2}, 0.05, 0.9, 0.4);
  a.baseline_shares = {0.3, 0.05};
  a.baseline_share_bias = 0.05;
  std::vector<std::pair<std::size_t, DeepAttribution>> results;
  results.emplace_back(1, a);
  std::ostringstream out;
  emit_decomposition(out, results, names, nullptr, ReportFormat::csv);
  std::istringstream lines(out.str());
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  const auto cells = split_csv_line(row);
  CHECK(cells[1] == "0.40000000000000002");  // 0.1 + 0.3
  CHECK(cells[2] == "0.25");
  CHECK(cells[3] == "0.10000000000000001");  // bias + share_bias
}

TEST_CASE("empty result lists produce a bare header") {
  std::ostringstream out;
  emit_decomposition(out, {}, {"f"}, nullptr, ReportFormat::csv);
  CHECK(out.str() ==
        "row,f,bias,predicted,reference,prediction_minus_reference,"
        "reconstruction_error,grid_points\n");
}

TEST_CASE("grouping parser validates its header and duplicates") {
  {
    std::stringstream ss("feature,group\nf1,A\nf2,B\n");
    const FeatureGrouping g = parse_grouping(ss);
    CHECK(g.mapping.at("f1") == "A");
    CHECK(g.mapping.at("f2") == "B");
  }
  {
    std::stringstream ss("feat,group\nf1,A\n");
    CHECK_THROWS_AS(parse_grouping(ss), ParseError);
  }
  {
    std::stringstream ss("feature,group\nf1,A\nf1,B\n");
    CHECK_THROWS_AS(parse_grouping(ss), ParseError);
  }
}
