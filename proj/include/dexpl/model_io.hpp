#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "dexpl/model.hpp"

namespace dexpl {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline double number_at(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number())
    throw ParseError(where + ": expected a number, got " + std::string(j.type_name()));
  return j.get<double>();
}

}  // namespace detail

/// Parses the versioned model format:
///   { "format_version": 1, "input_dim": N,
///     "layers": [ { "activation": "...", "weights": [[...], ...],
///                   "biases": [...] }, ... ] }
/// Dimension mismatches and unknown activations are rejected with the
/// offending position in the message.
inline MlpModel parse_model(std::istream& in, const std::string& origin = "model") {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!root.is_object()) throw ParseError(origin + ": top level must be an object");

  MlpModel model;
  if (!root.contains("format_version") || !root["format_version"].is_number_integer())
    throw ParseError(origin + ": missing integer field \"format_version\"");
  model.format_version = root["format_version"].get<int>();
  if (model.format_version != kModelFormatVersion)
    throw ParseError(origin + ": unsupported format_version " +
                     std::to_string(model.format_version) + " (expected " +
                     std::to_string(kModelFormatVersion) + ")");

  if (!root.contains("input_dim") || !root["input_dim"].is_number_integer() ||
      root["input_dim"].get<long>() <= 0)
    throw ParseError(origin + ": missing positive integer field \"input_dim\"");
  model.input_dim = root["input_dim"].get<std::size_t>();

  if (!root.contains("layers") || !root["layers"].is_array() || root["layers"].empty())
    throw ParseError(origin + ": \"layers\" must be a non-empty array");

  std::size_t expected_in = model.input_dim;
  for (std::size_t l = 0; l < root["layers"].size(); ++l) {
    const nlohmann::json& jl = root["layers"][l];
    const std::string where = origin + ": layers[" + std::to_string(l) + "]";
    if (!jl.is_object()) throw ParseError(where + ": expected an object");

    if (!jl.contains("activation") || !jl["activation"].is_string())
      throw ParseError(where + ": missing string field \"activation\"");
    const std::string act = jl["activation"].get<std::string>();
    LinkFunction link;
    try {
      if (act == "leaky_relu") {
        if (!jl.contains("slope"))
          throw ParseError(where + ": leaky_relu requires a \"slope\" field");
        link = LinkFunction::leaky_relu(detail::number_at(jl["slope"], where + ".slope"));
      } else {
        link = parse_link(act);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }

    if (!jl.contains("weights") || !jl["weights"].is_array() || jl["weights"].empty())
      throw ParseError(where + ".weights: must be a non-empty array of rows");
    if (!jl.contains("biases") || !jl["biases"].is_array())
      throw ParseError(where + ".biases: must be an array");

    const std::size_t out_dim = jl["weights"].size();
    Layer layer;
    layer.link = link;
    layer.weights = Matrix(out_dim, expected_in);
    for (std::size_t r = 0; r < out_dim; ++r) {
      const nlohmann::json& jrow = jl["weights"][r];
      const std::string row_where = where + ".weights row " + std::to_string(r + 1);
      if (!jrow.is_array() || jrow.size() != expected_in)
        throw ParseError(row_where + ": expected " + std::to_string(expected_in) +
                         " entries, got " +
                         std::to_string(jrow.is_array() ? jrow.size() : 0));
      for (std::size_t c = 0; c < expected_in; ++c)
        layer.weights(r, c) = detail::number_at(jrow[c], row_where);
    }
    if (jl["biases"].size() != out_dim)
      throw ParseError(where + ".biases: expected " + std::to_string(out_dim) +
                       " entries, got " + std::to_string(jl["biases"].size()));
    layer.biases.resize(out_dim);
    for (std::size_t r = 0; r < out_dim; ++r)
      layer.biases[r] =
          detail::number_at(jl["biases"][r], where + ".biases[" + std::to_string(r) + "]");

    expected_in = out_dim;
    model.layers.push_back(std::move(layer));
  }

  model.validate();
  return model;
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file \"" + path + "\"");
  return parse_model(in, path);
}

inline void save_model(const MlpModel& model, std::ostream& out) {
  nlohmann::ordered_json root;
  root["format_version"] = model.format_version;
  root["input_dim"] = model.input_dim;
  root["layers"] = nlohmann::ordered_json::array();
  for (const Layer& layer : model.layers) {
    nlohmann::ordered_json jl;
    jl["activation"] = link_name(layer.link);
    if (layer.link.kind == LinkKind::leaky_relu) jl["slope"] = layer.link.slope;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      auto row = nlohmann::ordered_json::array();
      for (double v : layer.weights.row(r)) row.push_back(v);
      rows.push_back(std::move(row));
    }
    jl["weights"] = std::move(rows);
    jl["biases"] = layer.biases;
    root["layers"].push_back(std::move(jl));
  }
  out << root.dump(2) << '\n';
}

}  // namespace dexpl
