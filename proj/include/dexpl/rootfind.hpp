#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dexpl/errors.hpp"
#include "dexpl/linalg.hpp"
#include "dexpl/link.hpp"

namespace dexpl {

/// Axis-aligned box of admissible inputs.
struct InputDomain {
  Vector lower;
  Vector upper;

  std::size_t size() const { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size())
      throw DimensionError("domain: lower and upper bound lengths differ");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw NonFiniteInput("domain bounds must be finite");
      if (lower[i] > upper[i])
        throw Error("domain: lower[" + std::to_string(i) + "] exceeds upper bound");
    }
  }

  bool contains(std::span<const double> x, double tol = 1e-12) const {
    if (x.size() != size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
    return true;
  }

  /// Per-feature [min, max] over the rows of a data matrix, expandable by a
  /// symmetric margin.
  static InputDomain from_data(const Matrix& data, double margin = 0.0) {
    if (data.rows == 0) throw Error("domain: cannot be built from an empty matrix");
    InputDomain d;
    d.lower.assign(data.cols, std::numeric_limits<double>::infinity());
    d.upper.assign(data.cols, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < data.rows; ++r)
      for (std::size_t c = 0; c < data.cols; ++c) {
        d.lower[c] = std::min(d.lower[c], data(r, c));
        d.upper[c] = std::max(d.upper[c], data(r, c));
      }
    for (std::size_t c = 0; c < data.cols; ++c) {
      d.lower[c] -= margin;
      d.upper[c] += margin;
    }
    return d;
  }
};

/// Reference level the root point has to achieve: the attainable minimum of
/// the neuron over the domain, or an explicit level a.
struct RootTarget {
  enum class Mode { attainable_minimum, explicit_level };
  Mode mode = Mode::attainable_minimum;
  double level = 0.0;

  static RootTarget minimum() { return {Mode::attainable_minimum, 0.0}; }
  static RootTarget at_level(double a) { return {Mode::explicit_level, a}; }
};

/// Solution of the constrained projection problem.
struct RootPoint {
  Vector theta;     // admissible point achieving the level
  double achieved;  // G(beta' theta + bias)
  double residual;  // |achieved - a|
  double distance;  // ||theta - x||_2
};

enum class Extremum { minimum, maximum };

struct ExtremumResult {
  Vector theta;
  double value;          // link value at theta
  double preactivation;  // beta' theta + bias
};

/// Exact extremum of link(beta' theta + bias) over the box. Monotone links
/// make this a corner problem: pick the lower bound where the weight pulls
/// down, the upper bound where it pulls up. Zero-weight coordinates are
/// placed at the box midpoint.
inline ExtremumResult attainable_extremum(std::span<const double> beta, double bias,
                                          const LinkFunction& link,
                                          const InputDomain& domain,
                                          Extremum which = Extremum::minimum) {
  domain.validate();
  if (beta.size() != domain.size())
    throw DimensionError("attainable_extremum: weight/domain length mismatch");
  if (!all_finite(beta) || !std::isfinite(bias))
    throw NonFiniteInput("attainable_extremum: weights and bias must be finite");

  ExtremumResult res;
  res.theta.resize(beta.size());
  double pre = bias;
  const bool want_min = (which == Extremum::minimum);
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (beta[i] > 0.0)
      res.theta[i] = want_min ? domain.lower[i] : domain.upper[i];
    else if (beta[i] < 0.0)
      res.theta[i] = want_min ? domain.upper[i] : domain.lower[i];
    else
      res.theta[i] = 0.5 * (domain.lower[i] + domain.upper[i]);
    pre += beta[i] * res.theta[i];
  }
  res.preactivation = pre;
  res.value = link_eval(link, pre);
  return res;
}

namespace detail {

/// theta(lambda) with theta_i = clip(x_i + lambda beta_i) and the resulting
/// preactivation beta' theta + bias. phi is monotone non-decreasing in
/// lambda, piecewise linear with breakpoints where coordinates saturate.
inline double clipped_preactivation(std::span<const double> x,
                                    std::span<const double> beta, double bias,
                                    const InputDomain& domain, double lambda,
                                    Vector* theta_out = nullptr) {
  double pre = bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = std::clamp(x[i] + lambda * beta[i], domain.lower[i], domain.upper[i]);
    if (theta_out) (*theta_out)[i] = t;
    pre += beta[i] * t;
  }
  return pre;
}

}  // namespace detail

/// Solves  min ||theta - x||^2  s.t.  link(beta' theta + bias) = a, theta in
/// the box.  For the monotone links handled here the level set is the slab
/// beta' theta + bias in [lo, hi] given by the analytic preimage of a, so the
/// problem reduces to the box-constrained Euclidean projection of x onto a
/// hyperplane. That projection is theta_i = clip(x_i + lambda beta_i) for a
/// scalar multiplier lambda, found by bisection (terminated at 1e-12 on the
/// multiplier) and polished by solving the linear piece of the active set.
///
/// In attainable-minimum mode the corner from attainable_extremum is returned
/// directly.
inline RootPoint solve_root(std::span<const double> x, std::span<const double> beta,
                            double bias, const LinkFunction& link,
                            const InputDomain& domain, const RootTarget& target,
                            double tol_root = 1e-9) {
  domain.validate();
  if (x.size() != beta.size() || x.size() != domain.size())
    throw DimensionError("solve_root: length mismatch");
  if (!all_finite(x) || !all_finite(beta) || !std::isfinite(bias))
    throw NonFiniteInput("solve_root: inputs must be finite");
  if (!domain.contains(x, 1e-9))
    throw Error("solve_root: observation lies outside the domain");

  if (target.mode == RootTarget::Mode::attainable_minimum) {
    ExtremumResult ext = attainable_extremum(beta, bias, link, domain);
    RootPoint root;
    // Zero-weight coordinates move nowhere: distance minimization.
    root.theta = ext.theta;
    for (std::size_t i = 0; i < beta.size(); ++i)
      if (beta[i] == 0.0)
        root.theta[i] = std::clamp(x[i], domain.lower[i], domain.upper[i]);
    root.achieved = ext.value;
    root.residual = 0.0;
    root.distance = euclidean_distance(root.theta, x);
    return root;
  }

  const double a = target.level;
  const LevelPreimage pre_band = level_preimage(link, a);  // throws if outside image

  const double pre_min =
      attainable_extremum(beta, bias, link, domain, Extremum::minimum).preactivation;
  const double pre_max =
      attainable_extremum(beta, bias, link, domain, Extremum::maximum).preactivation;

  const double slack = 1e-9 * std::max({1.0, std::abs(pre_min), std::abs(pre_max)});
  if (pre_band.lo > pre_max + slack || pre_band.hi < pre_min - slack)
    throw InfeasibleTarget(
        "level " + std::to_string(a) + " is not attainable: link ranges over [" +
        std::to_string(link_eval(link, pre_min)) + ", " +
        std::to_string(link_eval(link, pre_max)) + "] on this domain");

  double band_lo = std::max(pre_band.lo, pre_min);
  double band_hi = std::min(pre_band.hi, pre_max);
  if (band_lo > band_hi) {
    // feasible only through the slack; snap to the nearest attainable level
    band_lo = band_hi = (pre_band.lo > pre_max) ? pre_max : pre_min;
  }

  const double pre_x = dot(beta, x) + bias;
  RootPoint root;
  root.theta.assign(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i)
    root.theta[i] = std::clamp(root.theta[i], domain.lower[i], domain.upper[i]);

  if (pre_x >= band_lo && pre_x <= band_hi) {
    // Already on the level set.
    root.achieved = link_eval(link, pre_x);
    root.residual = std::abs(root.achieved - a);
    root.distance = euclidean_distance(root.theta, x);
    return root;
  }
  const double r = std::clamp(pre_x, band_lo, band_hi);  // nearest feasible level

  // Bracket the multiplier: beyond the outermost saturation breakpoints phi
  // is flat at the attainable extremes.
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (beta[i] == 0.0) continue;
    const double b1 = (domain.lower[i] - x[i]) / beta[i];
    const double b2 = (domain.upper[i] - x[i]) / beta[i];
    lo = std::min(lo, std::min(b1, b2));
    hi = std::max(hi, std::max(b1, b2));
  }
  lo -= 1.0;
  hi += 1.0;

  Vector theta(x.size());
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-12; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (detail::clipped_preactivation(x, beta, bias, domain, mid) < r)
      lo = mid;
    else
      hi = mid;
  }
  double lambda = 0.5 * (lo + hi);
  detail::clipped_preactivation(x, beta, bias, domain, lambda, &theta);

  // Polish: on the final bracket the active set is fixed, so solve the linear
  // piece exactly for the free coordinates.
  double fixed = bias, free_dot = 0.0, denom = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double unclipped = x[i] + lambda * beta[i];
    if (unclipped > domain.lower[i] && unclipped < domain.upper[i]) {
      free_dot += beta[i] * x[i];
      denom += beta[i] * beta[i];
    } else {
      fixed += beta[i] * theta[i];
    }
  }
  if (denom > 0.0) {
    const double exact = std::clamp((r - fixed - free_dot) / denom, lo, hi);
    Vector candidate(x.size());
    const double pre_exact =
        detail::clipped_preactivation(x, beta, bias, domain, exact, &candidate);
    const double pre_bisect = detail::clipped_preactivation(x, beta, bias, domain, lambda);
    if (std::abs(pre_exact - r) <= std::abs(pre_bisect - r)) theta = candidate;
  }

  root.theta = theta;
  root.achieved = link_eval(link, dot(beta, theta) + bias);
  root.residual = std::abs(root.achieved - a);
  root.distance = euclidean_distance(root.theta, x);
  if (root.residual > std::max(tol_root, 1e-12 * std::max(1.0, std::abs(a))))
    throw ToleranceNotReached(0, root.residual, "solve_root: projection residual");
  return root;
}

}  // namespace dexpl
