#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dexpl/errors.hpp"
#include "dexpl/linalg.hpp"
#include "dexpl/link.hpp"

namespace dexpl {

/// One fully connected layer: out = link(W * in + b), link applied
/// element-wise.
struct Layer {
  Matrix weights;  // out_dim x in_dim
  Vector biases;   // out_dim
  LinkFunction link;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

struct MlpModel {
  std::vector<Layer> layers;
  std::size_t input_dim = 0;
  int format_version = 1;

  std::size_t output_dim() const { return layers.back().out_dim(); }
  std::size_t hidden_count() const { return layers.size() - 1; }

  /// Checks layer chaining, finiteness and non-degenerate shapes.
  void validate() const {
    if (layers.empty()) throw UnsupportedModel("model must have at least one layer");
    if (input_dim == 0) throw UnsupportedModel("input_dim must be positive");
    std::size_t prev = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Layer& layer = layers[l];
      const std::string where = "layers[" + std::to_string(l) + "]";
      if (layer.out_dim() == 0)
        throw DimensionError(where + ": layer has no neurons");
      if (layer.in_dim() != prev)
        throw DimensionError(where + ": expects " + std::to_string(layer.in_dim()) +
                             " inputs, previous layer provides " + std::to_string(prev));
      if (layer.biases.size() != layer.out_dim())
        throw DimensionError(where + ": " + std::to_string(layer.biases.size()) +
                             " biases for " + std::to_string(layer.out_dim()) +
                             " neurons");
      if (!all_finite(layer.weights.data) || !all_finite(layer.biases))
        throw NonFiniteInput(where + ": weights and biases must be finite");
      prev = layer.out_dim();
    }
  }
};

/// Layer-by-layer record of one forward pass.
struct ForwardTrace {
  std::vector<Vector> pre;   // preactivations, one vector per layer
  std::vector<Vector> post;  // activations, one vector per layer

  const Vector& output() const { return post.back(); }

  double output_scalar() const {
    if (post.back().size() != 1)
      throw UnsupportedModel("model output is not scalar");
    return post.back()[0];
  }
};

inline ForwardTrace forward(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim)
    throw DimensionError("forward: input has " + std::to_string(x.size()) +
                         " entries, model expects " + std::to_string(model.input_dim));
  if (!all_finite(x)) throw NonFiniteInput("forward: input must be finite");

  ForwardTrace trace;
  trace.pre.reserve(model.layers.size());
  trace.post.reserve(model.layers.size());
  Vector current(x.begin(), x.end());
  for (const Layer& layer : model.layers) {
    Vector pre = matvec(layer.weights, current);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layer.biases[i];
    Vector post(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i)
      post[i] = link_eval(layer.link, pre[i]);
    trace.pre.push_back(std::move(pre));
    current = post;
    trace.post.push_back(std::move(post));
  }
  return trace;
}

}  // namespace dexpl
