#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "dexpl/errors.hpp"

namespace dexpl {

enum class LinkKind { linear, relu, leaky_relu, tanh, sigmoid };

/// A neuron's scalar nonlinearity. Every supported kind is monotone
/// non-decreasing and differentiable almost everywhere.
struct LinkFunction {
  LinkKind kind = LinkKind::linear;
  double slope = 0.0;  // leaky_relu only

  static LinkFunction linear() { return {LinkKind::linear, 0.0}; }
  static LinkFunction relu() { return {LinkKind::relu, 0.0}; }
  static LinkFunction leaky_relu(double slope) {
    if (!(slope >= 0.0) || !std::isfinite(slope))
      throw Error("leaky_relu slope must be finite and non-negative, got " +
                  std::to_string(slope));
    return {LinkKind::leaky_relu, slope};
  }
  static LinkFunction tanh() { return {LinkKind::tanh, 0.0}; }
  static LinkFunction sigmoid() { return {LinkKind::sigmoid, 0.0}; }

  bool operator==(const LinkFunction&) const = default;
};

namespace detail {
inline double stable_sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}
}  // namespace detail

/// G(y).
inline double link_eval(const LinkFunction& link, double y) {
  switch (link.kind) {
    case LinkKind::linear: return y;
    case LinkKind::relu: return y > 0.0 ? y : 0.0;
    case LinkKind::leaky_relu: return y > 0.0 ? y : link.slope * y;
    case LinkKind::tanh: return std::tanh(y);
    case LinkKind::sigmoid: return detail::stable_sigmoid(y);
  }
  return y;
}

/// g(y), the first derivative of G. At the relu kink (y == 0) the derivative
/// is taken as the left value: 0 for relu, `slope` for leaky_relu.
inline double link_deriv(const LinkFunction& link, double y) {
  switch (link.kind) {
    case LinkKind::linear: return 1.0;
    case LinkKind::relu: return y > 0.0 ? 1.0 : 0.0;
    case LinkKind::leaky_relu: return y > 0.0 ? 1.0 : link.slope;
    case LinkKind::tanh: {
      const double t = std::tanh(y);
      return 1.0 - t * t;
    }
    case LinkKind::sigmoid: {
      const double s = detail::stable_sigmoid(y);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

/// Trivial links have a derivative that is constant once the output is known;
/// attribution through them needs no path integration.
inline bool is_trivial(const LinkFunction& link) {
  switch (link.kind) {
    case LinkKind::linear:
    case LinkKind::relu:
    case LinkKind::leaky_relu: return true;
    case LinkKind::tanh:
    case LinkKind::sigmoid: return false;
  }
  return true;
}

/// Preactivation interval on which G equals `a`: a single point for strictly
/// monotone links, a half line for the flat part of (leaky_)relu.
struct LevelPreimage {
  double lo;
  double hi;
};

/// Throws InfeasibleTarget when `a` lies outside the image of the link
/// (sigmoid requires 0 < a < 1, tanh |a| < 1, relu a >= 0).
inline LevelPreimage level_preimage(const LinkFunction& link, double a) {
  if (!std::isfinite(a)) throw NonFiniteInput("level must be finite");
  const double inf = std::numeric_limits<double>::infinity();
  switch (link.kind) {
    case LinkKind::linear: return {a, a};
    case LinkKind::relu:
      if (a < 0.0)
        throw InfeasibleTarget("level " + std::to_string(a) +
                               " outside relu image [0, inf)");
      if (a == 0.0) return {-inf, 0.0};
      return {a, a};
    case LinkKind::leaky_relu:
      if (link.slope == 0.0) return level_preimage(LinkFunction::relu(), a);
      return a >= 0.0 ? LevelPreimage{a, a} : LevelPreimage{a / link.slope, a / link.slope};
    case LinkKind::tanh:
      if (!(a > -1.0 && a < 1.0))
        throw InfeasibleTarget("level " + std::to_string(a) +
                               " outside tanh image (-1, 1)");
      return {std::atanh(a), std::atanh(a)};
    case LinkKind::sigmoid:
      if (!(a > 0.0 && a < 1.0))
        throw InfeasibleTarget("level " + std::to_string(a) +
                               " outside sigmoid image (0, 1)");
      {
        const double y = std::log(a) - std::log1p(-a);
        return {y, y};
      }
  }
  return {a, a};
}

inline std::string link_name(const LinkFunction& link) {
  switch (link.kind) {
    case LinkKind::linear: return "linear";
    case LinkKind::relu: return "relu";
    case LinkKind::leaky_relu: return "leaky_relu";
    case LinkKind::tanh: return "tanh";
    case LinkKind::sigmoid: return "sigmoid";
  }
  return "linear";
}

/// Inverse of link_name; `slope` is consulted for leaky_relu only.
inline LinkFunction parse_link(const std::string& name, double slope = 0.01) {
  if (name == "linear") return LinkFunction::linear();
  if (name == "relu") return LinkFunction::relu();
  if (name == "leaky_relu") return LinkFunction::leaky_relu(slope);
  if (name == "tanh") return LinkFunction::tanh();
  if (name == "sigmoid") return LinkFunction::sigmoid();
  throw ParseError("unknown activation name \"" + name + "\"");
}

}  // namespace dexpl
