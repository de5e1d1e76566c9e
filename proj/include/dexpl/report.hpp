#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dexpl/dataset.hpp"
#include "dexpl/deep.hpp"
#include "dexpl/errors.hpp"

namespace dexpl {

/// Maps every feature name to a group label; used to sum contributions by
/// topic the way decomposition charts present them.
struct FeatureGrouping {
  std::map<std::string, std::string> mapping;
};

/// Grouping file format: header "feature,group", one row per feature.
inline FeatureGrouping parse_grouping(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("grouping: empty file, missing header");
  const std::vector<std::string> header = detail::split_line(line);
  if (header.size() != 2 || header[0] != "feature" || header[1] != "group")
    throw ParseError("grouping: expected header \"feature,group\"");
  FeatureGrouping g;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++data_row;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_line(line);
    if (cells.size() != 2)
      throw ParseError("grouping row " + std::to_string(data_row) +
                       ": expected 2 columns, got " + std::to_string(cells.size()));
    if (cells[0].empty() || cells[1].empty())
      throw ParseError("grouping row " + std::to_string(data_row) +
                       ": empty feature or group name");
    if (!g.mapping.emplace(cells[0], cells[1]).second)
      throw ParseError("grouping row " + std::to_string(data_row) +
                       ": duplicate feature \"" + cells[0] + "\"");
  }
  return g;
}

inline FeatureGrouping load_grouping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open grouping file \"" + path + "\"");
  return parse_grouping(in);
}

enum class ReportFormat { csv, json };

namespace detail {

/// 17 significant digits: enough for exact double round-trips.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct GroupLayout {
  std::vector<std::string> group_names;        // alphabetical
  std::vector<std::size_t> feature_to_group;   // feature index -> group column
};

inline GroupLayout make_layout(const std::vector<std::string>& feature_names,
                               const FeatureGrouping* grouping) {
  GroupLayout layout;
  std::vector<std::string> labels(feature_names.size());
  if (grouping) {
    if (grouping->mapping.size() != feature_names.size())
      throw Error("grouping covers " + std::to_string(grouping->mapping.size()) +
                  " features, dataset has " + std::to_string(feature_names.size()));
    for (std::size_t i = 0; i < feature_names.size(); ++i) {
      const auto it = grouping->mapping.find(feature_names[i]);
      if (it == grouping->mapping.end())
        throw Error("feature \"" + feature_names[i] + "\" missing from grouping");
      labels[i] = it->second;
    }
    for (const auto& [feature, group] : grouping->mapping)
      if (std::find(feature_names.begin(), feature_names.end(), feature) ==
          feature_names.end())
        throw Error("unknown feature \"" + feature + "\" in grouping");
  } else {
    labels = feature_names;
  }
  layout.group_names = labels;
  std::sort(layout.group_names.begin(), layout.group_names.end());
  layout.group_names.erase(
      std::unique(layout.group_names.begin(), layout.group_names.end()),
      layout.group_names.end());
  layout.feature_to_group.resize(feature_names.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    layout.feature_to_group[i] =
        std::lower_bound(layout.group_names.begin(), layout.group_names.end(),
                         labels[i]) -
        layout.group_names.begin();
  return layout;
}

inline Vector grouped_contributions(const DeepAttribution& a, const GroupLayout& layout) {
  Vector cols(layout.group_names.size(), 0.0);
  for (std::size_t i = 0; i < a.feature_contributions.size(); ++i) {
    double v = a.feature_contributions[i];
    if (!a.baseline_shares.empty()) v += a.baseline_shares[i];
    cols[layout.feature_to_group[i]] += v;
  }
  return cols;
}

}  // namespace detail

/// Plot-ready decomposition table: one row per observation with grouped
/// contribution columns (alphabetical), the cumulated bias column, then the
/// diagnostics. Redistributed baseline shares, when present, are folded into
/// the contribution columns.
inline void emit_decomposition(std::ostream& out,
                               const std::vector<std::pair<std::size_t, DeepAttribution>>& results,
                               const std::vector<std::string>& feature_names,
                               const FeatureGrouping* grouping, ReportFormat format) {
  const detail::GroupLayout layout = detail::make_layout(feature_names, grouping);

  if (format == ReportFormat::csv) {
    out << "row";
    for (const std::string& g : layout.group_names) out << ',' << detail::csv_escape(g);
    out << ",bias,predicted,reference,prediction_minus_reference,"
           "reconstruction_error,grid_points\n";
    for (const auto& [row_id, a] : results) {
      const Vector cols = detail::grouped_contributions(a, layout);
      out << row_id;
      for (double v : cols) out << ',' << detail::format_double(v);
      out << ',' << detail::format_double(a.bias_total + a.baseline_share_bias);
      out << ',' << detail::format_double(a.predicted);
      out << ',' << detail::format_double(a.reference_value);
      out << ',' << detail::format_double(a.predicted - a.reference_value);
      out << ',' << detail::format_double(a.reconstruction_error);
      out << ',' << a.grid_points_used << '\n';
    }
    return;
  }

  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const auto& [row_id, a] : results) {
    const Vector cols = detail::grouped_contributions(a, layout);
    nlohmann::ordered_json jr;
    jr["row"] = row_id;
    nlohmann::ordered_json jc;
    for (std::size_t g = 0; g < cols.size(); ++g) jc[layout.group_names[g]] = cols[g];
    jr["contributions"] = std::move(jc);
    jr["bias"] = a.bias_total + a.baseline_share_bias;
    jr["predicted"] = a.predicted;
    jr["reference"] = a.reference_value;
    jr["prediction_minus_reference"] = a.predicted - a.reference_value;
    jr["reconstruction_error"] = a.reconstruction_error;
    jr["grid_points"] = a.grid_points_used;
    root.push_back(std::move(jr));
  }
  out << root.dump(2) << '\n';
}

}  // namespace dexpl
