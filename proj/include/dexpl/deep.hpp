#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dexpl/attribution.hpp"
#include "dexpl/errors.hpp"
#include "dexpl/linalg.hpp"
#include "dexpl/model.hpp"
#include "dexpl/rootfind.hpp"

namespace dexpl {

/// Per-layer contribution matrix: one row per neuron, one column per layer
/// input plus a trailing bias pseudo-input column.
struct ContributionMatrix {
  enum class Kind { raw, share };
  Matrix entries;  // out_dim x (in_dim + 1)
  int layer_index = 0;
  Kind kind = Kind::raw;
};

struct ThresholdSpec {
  double level = 0.5;
};

enum class ExplainMode { attainable_minimum, threshold };

/// Exact chaining branches per downstream neuron (one upstream matrix per
/// distinct root vector); shared reuses one full-output share matrix per
/// layer as a cheaper approximation.
enum class ChainMode { exact, shared };

struct DeepConfig {
  GridSpec grid = GridSpec::proportional();
  double tol = 1e-6;
  ExplainMode mode = ExplainMode::attainable_minimum;
  ThresholdSpec threshold{0.5};  // threshold mode only
  ChainMode chain = ChainMode::exact;
  long max_chain_branches = 4096;
  bool redistribute = false;
  double root_tol = 1e-9;
  double dead_tol = 1e-12;
  bool keep_matrices = true;
};

/// boxes[0] bounds the model inputs; boxes[l] for l > 0 bounds the
/// activations of layer l-1, i.e. the input space of layer l.
struct LayerDomains {
  std::vector<InputDomain> boxes;
};

/// Empirical per-neuron activation bounds over a reference dataset.
inline LayerDomains activation_domains(const MlpModel& model, const Matrix& data,
                                       double margin = 0.0) {
  model.validate();
  if (data.rows == 0)
    throw Error("activation_domains: need at least one reference observation");
  if (data.cols != model.input_dim)
    throw DimensionError("activation_domains: dataset has " + std::to_string(data.cols) +
                         " columns, model expects " + std::to_string(model.input_dim));

  LayerDomains d;
  d.boxes.resize(model.layers.size());
  d.boxes[0] = InputDomain::from_data(data, margin);
  for (std::size_t l = 1; l < model.layers.size(); ++l) {
    const std::size_t width = model.layers[l - 1].out_dim();
    d.boxes[l].lower.assign(width, std::numeric_limits<double>::infinity());
    d.boxes[l].upper.assign(width, -std::numeric_limits<double>::infinity());
  }
  for (std::size_t r = 0; r < data.rows; ++r) {
    const ForwardTrace trace = forward(model, data.row(r));
    for (std::size_t l = 1; l < model.layers.size(); ++l) {
      const Vector& act = trace.post[l - 1];
      for (std::size_t i = 0; i < act.size(); ++i) {
        d.boxes[l].lower[i] = std::min(d.boxes[l].lower[i], act[i]);
        d.boxes[l].upper[i] = std::max(d.boxes[l].upper[i], act[i]);
      }
    }
  }
  if (margin != 0.0)
    for (std::size_t l = 1; l < d.boxes.size(); ++l)
      for (std::size_t i = 0; i < d.boxes[l].size(); ++i) {
        d.boxes[l].lower[i] -= margin;
        d.boxes[l].upper[i] += margin;
      }
  return d;
}

/// Full-output contribution matrix of one layer: row i decomposes neuron i's
/// output over the layer inputs plus bias. Trivial links use the regime
/// derivative directly (exact, no root search); non-trivial links solve the
/// per-neuron root problem and integrate stepwise, with the baseline landing
/// in the bias column. Per-neuron tolerance budget is tol / out_dim.
inline ContributionMatrix layer_attribute(const Layer& layer,
                                          std::span<const double> input,
                                          const InputDomain& domain,
                                          const GridSpec& grid, double tol,
                                          RootTarget target = RootTarget::minimum(),
                                          double root_tol = 1e-9) {
  if (input.size() != layer.in_dim())
    throw DimensionError("layer_attribute: input length mismatch");
  const std::size_t out_dim = layer.out_dim();
  const std::size_t in_dim = layer.in_dim();
  ContributionMatrix m;
  m.kind = ContributionMatrix::Kind::raw;
  m.entries = Matrix(out_dim, in_dim + 1);

  const double neuron_tol = tol / static_cast<double>(out_dim);
  for (std::size_t i = 0; i < out_dim; ++i) {
    const auto beta = layer.weights.row(i);
    const double b = layer.biases[i];
    if (is_trivial(layer.link)) {
      const double pre = dot(beta, input) + b;
      const double g = link_deriv(layer.link, pre);
      for (std::size_t j = 0; j < in_dim; ++j) m.entries(i, j) = g * beta[j] * input[j];
      m.entries(i, in_dim) = g * b;
    } else {
      try {
        const RootPoint root =
            solve_root(input, beta, b, layer.link, domain, target, root_tol);
        const AttributionResult res =
            stepwise_attribute(input, beta, b, layer.link, root, grid, neuron_tol);
        for (std::size_t j = 0; j < in_dim; ++j) m.entries(i, j) = res.contributions[j];
        m.entries(i, in_dim) = res.baseline_value;
      } catch (const InfeasibleTarget& e) {
        throw InfeasibleTarget("neuron " + std::to_string(i) + ": " + e.what());
      } catch (const ToleranceNotReached& e) {
        throw ToleranceNotReached(e.grid_points(), e.error(),
                                  "neuron " + std::to_string(i));
      }
    }
  }
  return m;
}

/// Normalizes a raw contribution matrix by the neuron outputs so that every
/// live row sums to exactly one; the rounding/quadrature residual is folded
/// into the bias column. Dead rows (|output| <= dead_tol) become all-zero.
inline ContributionMatrix to_share_matrix(const ContributionMatrix& raw,
                                          std::span<const double> neuron_outputs,
                                          double dead_tol = 1e-12) {
  if (neuron_outputs.size() != raw.entries.rows)
    throw DimensionError("to_share_matrix: output length mismatch");
  ContributionMatrix share;
  share.kind = ContributionMatrix::Kind::share;
  share.layer_index = raw.layer_index;
  share.entries = Matrix(raw.entries.rows, raw.entries.cols);
  const std::size_t in_dim = raw.entries.cols - 1;
  for (std::size_t i = 0; i < raw.entries.rows; ++i) {
    const double out = neuron_outputs[i];
    if (std::abs(out) <= dead_tol) continue;  // dead neuron: zero row
    double fsum = 0.0;
    for (std::size_t j = 0; j < in_dim; ++j) {
      share.entries(i, j) = raw.entries(i, j) / out;
      fsum += share.entries(i, j);
    }
    share.entries(i, in_dim) = 1.0 - fsum;
  }
  return share;
}

struct DeepAttribution {
  Vector feature_contributions;  // one entry per model input
  double bias_total = 0.0;
  Vector baseline_shares;        // empty unless redistribution is on
  double baseline_share_bias = 0.0;
  double reference_value = 0.0;  // a, or the decision threshold
  double predicted = 0.0;
  double reconstruction_error = 0.0;
  long grid_points_used = 1;
  std::vector<ContributionMatrix> matrices;  // diagnostic
};

namespace detail {

struct ChainContext {
  const MlpModel& model;
  const LayerDomains& domains;
  const DeepConfig& cfg;
  const ForwardTrace& trace;
  std::span<const double> x;
  Vector fc{};
  double bias_acc = 0.0;
  long root_branches = 0;
  long max_grid = 1;
  std::vector<ContributionMatrix>* matrices = nullptr;
};

struct NeuronShare {
  Vector features;           // share of each layer input, sums with bias_share to 1
  double bias_share = 0.0;
  Vector below;              // start levels inherited by the previous layer
  bool movement_below = false;
};

inline std::span<const double> layer_inputs(const ChainContext& ctx, std::size_t layer) {
  return layer == 0 ? ctx.x : std::span<const double>(ctx.trace.post[layer - 1]);
}

/// Decomposes neuron j of the given layer over that layer's inputs.
/// start == nullptr requests the full-output decomposition (regime rows for
/// trivial links, own attainable-minimum root otherwise); a start level
/// requests the movement decomposition z_out - *start, which always solves
/// the root problem at that explicit level.
inline NeuronShare decompose_neuron(ChainContext& ctx, std::size_t layer_index,
                                    std::size_t j, const double* start) {
  const Layer& layer = ctx.model.layers[layer_index];
  const std::span<const double> z_in = layer_inputs(ctx, layer_index);
  const double z_out = ctx.trace.post[layer_index][j];
  const auto beta = layer.weights.row(j);
  const double b = layer.biases[j];

  NeuronShare s;
  s.features.assign(z_in.size(), 0.0);

  const double movement = z_out - (start ? *start : 0.0);
  if (std::abs(movement) <= ctx.cfg.dead_tol) return s;  // dead row

  Vector raw(z_in.size(), 0.0);
  const double neuron_tol =
      ctx.cfg.tol / static_cast<double>(layer.out_dim());

  if (!start && is_trivial(layer.link)) {
    const double g = link_deriv(layer.link, ctx.trace.pre[layer_index][j]);
    for (std::size_t k = 0; k < z_in.size(); ++k) raw[k] = g * beta[k] * z_in[k];
  } else {
    const RootTarget target = start ? RootTarget::at_level(*start) : RootTarget::minimum();
    try {
      const RootPoint root = solve_root(z_in, beta, b, layer.link,
                                        ctx.domains.boxes[layer_index], target,
                                        ctx.cfg.root_tol);
      const AttributionResult res = stepwise_attribute(z_in, beta, b, layer.link, root,
                                                       ctx.cfg.grid, neuron_tol);
      raw = res.contributions;
      ctx.max_grid = std::max(ctx.max_grid, res.grid_points_used);
      s.below = root.theta;
      s.movement_below = true;
    } catch (const InfeasibleTarget& e) {
      throw InfeasibleTarget("layer " + std::to_string(layer_index) + ", neuron " +
                             std::to_string(j) + ": " + e.what());
    } catch (const ToleranceNotReached& e) {
      throw ToleranceNotReached(e.grid_points(), e.error(),
                                "layer " + std::to_string(layer_index) + ", neuron " +
                                    std::to_string(j));
    }
  }

  // Shares against the decomposed quantity; the bias column takes the exact
  // row-stochastic remainder (own baseline, trivial bias term, quadrature
  // residue).
  double fsum = 0.0;
  for (std::size_t k = 0; k < z_in.size(); ++k) {
    s.features[k] = raw[k] / movement;
    fsum += s.features[k];
  }
  s.bias_share = 1.0 - fsum;
  return s;
}

/// Recursive chain. w holds the contribution mass assigned to each neuron of
/// the layer; start (when present) holds the level each neuron's movement
/// starts from, one entry per neuron. Trivial full-output branches share
/// identical semantics downstream and are merged into one recursion; every
/// root-based decomposition branches individually because its root vector
/// differs per downstream neuron.
inline void push_down(ChainContext& ctx, std::size_t layer_index, const Vector& w,
                      const Vector* start) {
  const Layer& layer = ctx.model.layers[layer_index];
  const std::size_t n_out = layer.out_dim();
  const std::size_t n_in = layer.in_dim();

  ContributionMatrix diag;
  if (ctx.matrices) {
    diag.kind = ContributionMatrix::Kind::share;
    diag.layer_index = static_cast<int>(layer_index);
    diag.entries = Matrix(n_out, n_in + 1);
  }

  Vector merged_w;
  bool any_merged = false;
  for (std::size_t j = 0; j < n_out; ++j) {
    if (w[j] == 0.0) continue;
    const double* st = start ? &(*start)[j] : nullptr;
    const bool needs_root = st != nullptr || !is_trivial(layer.link);
    if (needs_root) {
      if (++ctx.root_branches > ctx.cfg.max_chain_branches)
        throw ChainBudgetExceeded(
            "exact chaining exceeded " + std::to_string(ctx.cfg.max_chain_branches) +
            " per-neuron root decompositions; rerun with the shared chain mode");
    }
    NeuronShare s = decompose_neuron(ctx, layer_index, j, st);
    if (ctx.matrices) {
      for (std::size_t k = 0; k < n_in; ++k) diag.entries(j, k) = s.features[k];
      diag.entries(j, n_in) = s.bias_share;
    }
    ctx.bias_acc += w[j] * s.bias_share;
    if (layer_index == 0) {
      for (std::size_t k = 0; k < n_in; ++k) ctx.fc[k] += w[j] * s.features[k];
    } else if (s.movement_below) {
      Vector w_next(n_in);
      for (std::size_t k = 0; k < n_in; ++k) w_next[k] = w[j] * s.features[k];
      push_down(ctx, layer_index - 1, w_next, &s.below);
    } else {
      if (!any_merged) {
        merged_w.assign(n_in, 0.0);
        any_merged = true;
      }
      for (std::size_t k = 0; k < n_in; ++k) merged_w[k] += w[j] * s.features[k];
    }
  }
  if (ctx.matrices) ctx.matrices->push_back(std::move(diag));
  if (layer_index > 0 && any_merged) {
    bool live = false;
    for (double v : merged_w)
      if (v != 0.0) live = true;
    if (live) push_down(ctx, layer_index - 1, merged_w, nullptr);
  }
}

/// Multiplies a row vector over layer `top`'s neurons down through the
/// full-output share matrices of layers top..0, accumulating the bias
/// columns. Returns the row over the model inputs.
inline Vector chain_through_shared(ChainContext& ctx, std::size_t top, Vector row,
                                   double& bias_acc) {
  for (std::size_t l = top + 1; l-- > 0;) {
    const Layer& layer = ctx.model.layers[l];
    const std::span<const double> z_in = layer_inputs(ctx, l);
    ContributionMatrix raw = layer_attribute(layer, z_in, ctx.domains.boxes[l],
                                             ctx.cfg.grid, ctx.cfg.tol,
                                             RootTarget::minimum(), ctx.cfg.root_tol);
    raw.layer_index = static_cast<int>(l);
    const ContributionMatrix share =
        to_share_matrix(raw, ctx.trace.post[l], ctx.cfg.dead_tol);
    const std::size_t n_in = layer.in_dim();
    Vector next(n_in, 0.0);
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
      if (row[i] == 0.0) continue;
      if (std::abs(ctx.trace.post[l][i]) <= ctx.cfg.dead_tol) {
        // Dead neuron: its output offers nothing to split, but mass assigned
        // to it must be conserved somewhere. It joins the bias column.
        bias_acc += row[i];
        continue;
      }
      bias_acc += row[i] * share.entries(i, n_in);
      for (std::size_t k = 0; k < n_in; ++k) next[k] += row[i] * share.entries(i, k);
    }
    if (ctx.matrices) ctx.matrices->push_back(share);
    row = std::move(next);
  }
  return row;
}

}  // namespace detail

/// Decomposes the scalar prediction of a deep MLP into additive per-input
/// contributions: the output layer is attributed relative to its root point
/// (the attainable minimum, or the decision threshold realized on the last
/// hidden layer's activations), intermediate layers are normalized to share
/// matrices, and the chain is multiplied down to the input features.
inline DeepAttribution deep_explain(const MlpModel& model, std::span<const double> x,
                                    const LayerDomains& domains, const DeepConfig& cfg) {
  model.validate();
  if (model.output_dim() != 1)
    throw UnsupportedModel("deep_explain requires a scalar output layer");
  if (domains.boxes.size() != model.layers.size())
    throw DimensionError("deep_explain: need one domain per layer");
  if (x.size() != model.input_dim)
    throw DimensionError("deep_explain: input length mismatch");
  if (!domains.boxes[0].contains(x, 1e-9))
    throw Error("deep_explain: observation lies outside the input domain");

  const ForwardTrace trace = forward(model, x);
  const std::size_t n_layers = model.layers.size();
  const Layer& out = model.layers[n_layers - 1];
  const auto beta = out.weights.row(0);
  const double b = out.biases[0];
  const std::span<const double> z_in =
      n_layers > 1 ? std::span<const double>(trace.post[n_layers - 2]) : x;

  DeepAttribution da;
  da.predicted = trace.post[n_layers - 1][0];

  detail::ChainContext ctx{model, domains, cfg, trace, x};
  ctx.fc.assign(model.input_dim, 0.0);
  if (cfg.keep_matrices) ctx.matrices = &da.matrices;

  const bool used_root =
      cfg.mode == ExplainMode::threshold || !is_trivial(out.link);
  RootPoint root;
  Vector out_row;
  double out_bias_term = 0.0;
  if (used_root) {
    const RootTarget target = cfg.mode == ExplainMode::threshold
                                  ? RootTarget::at_level(cfg.threshold.level)
                                  : RootTarget::minimum();
    root = solve_root(z_in, beta, b, out.link, domains.boxes[n_layers - 1], target,
                      cfg.root_tol);
    const AttributionResult res =
        stepwise_attribute(z_in, beta, b, out.link, root, cfg.grid, 0.5 * cfg.tol);
    out_row = res.contributions;
    da.reference_value = res.baseline_value;
    ctx.max_grid = res.grid_points_used;
  } else {
    // Trivial output link in minimum mode: exact regime decomposition of the
    // full output, reference zero.
    const double g = link_deriv(out.link, trace.pre[n_layers - 1][0]);
    out_row.resize(z_in.size());
    for (std::size_t j = 0; j < z_in.size(); ++j) out_row[j] = g * beta[j] * z_in[j];
    out_bias_term = g * b;
    da.reference_value = 0.0;
  }

  if (ctx.matrices) {
    ContributionMatrix raw;
    raw.kind = ContributionMatrix::Kind::raw;
    raw.layer_index = static_cast<int>(n_layers - 1);
    raw.entries = Matrix(1, z_in.size() + 1);
    for (std::size_t j = 0; j < z_in.size(); ++j) raw.entries(0, j) = out_row[j];
    raw.entries(0, z_in.size()) = out_bias_term;
    ctx.matrices->push_back(std::move(raw));
  }

  ctx.bias_acc = out_bias_term;
  if (n_layers == 1) {
    ctx.fc = out_row;
  } else if (cfg.chain == ChainMode::exact) {
    detail::push_down(ctx, n_layers - 2, out_row, used_root ? &root.theta : nullptr);
  } else {
    ctx.fc = detail::chain_through_shared(ctx, n_layers - 2, out_row, ctx.bias_acc);
  }

  da.feature_contributions = std::move(ctx.fc);
  da.bias_total = ctx.bias_acc;
  da.grid_points_used = ctx.max_grid;
  da.reconstruction_error = std::abs(sum(da.feature_contributions) + da.bias_total -
                                     (da.predicted - da.reference_value));
  if (da.reconstruction_error > cfg.tol)
    throw ToleranceNotReached(ctx.max_grid, da.reconstruction_error, "deep_explain");

  if (cfg.redistribute) {
    Vector top_shares = redistribute_baseline(da.reference_value, beta);
    if (n_layers == 1) {
      da.baseline_shares = std::move(top_shares);
    } else {
      detail::ChainContext share_ctx{model, domains, cfg, trace, x};
      da.baseline_shares = detail::chain_through_shared(share_ctx, n_layers - 2,
                                                        std::move(top_shares),
                                                        da.baseline_share_bias);
    }
  }
  return da;
}

/// One entry per dataset row; failed rows carry the error message instead of
/// aborting the batch.
struct RowOutcome {
  std::size_t row = 0;  // zero-based row index in the observation matrix
  std::optional<DeepAttribution> result;
  std::string error;
};

inline std::vector<RowOutcome> explain_dataset(const MlpModel& model,
                                               const Matrix& observations,
                                               const LayerDomains& domains,
                                               const DeepConfig& cfg) {
  std::vector<RowOutcome> out;
  out.reserve(observations.rows);
  for (std::size_t r = 0; r < observations.rows; ++r) {
    RowOutcome o;
    o.row = r;
    try {
      o.result = deep_explain(model, observations.row(r), domains, cfg);
    } catch (const Error& e) {
      o.error = e.what();
    }
    out.push_back(std::move(o));
  }
  return out;
}

struct ValidationRow {
  std::size_t row = 0;
  double error = 0.0;
  long grid_points = 0;
  std::string failure;  // empty when the row explained fine
};

struct ValidationReport {
  std::vector<ValidationRow> rows;
  double max_error = 0.0;
  std::size_t failures = 0;

  bool pass() const { return failures == 0; }
};

/// Conservation audit: explains every observation and checks the
/// reconstruction error against cfg.tol.
inline ValidationReport validate_dataset(const MlpModel& model, const Matrix& observations,
                                         const LayerDomains& domains,
                                         const DeepConfig& cfg) {
  ValidationReport report;
  const std::vector<RowOutcome> outcomes =
      explain_dataset(model, observations, domains, cfg);
  for (const RowOutcome& o : outcomes) {
    ValidationRow row;
    row.row = o.row;
    if (!o.result) {
      row.failure = o.error;
      ++report.failures;
    } else {
      row.error = o.result->reconstruction_error;
      row.grid_points = o.result->grid_points_used;
      report.max_error = std::max(report.max_error, row.error);
      if (row.error > cfg.tol) {
        row.failure = "reconstruction error above tolerance";
        ++report.failures;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace dexpl
