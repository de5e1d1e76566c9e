#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dexpl/errors.hpp"
#include "dexpl/linalg.hpp"
#include "dexpl/link.hpp"
#include "dexpl/rootfind.hpp"

namespace dexpl {

enum class PathScheme { left, midpoint };

/// Discretization of the straight path from the root point to the
/// observation. Fixed mode uses exactly n steps; proportional mode scales the
/// step count with the path length and refines by doubling up to n_max.
struct GridSpec {
  enum class Mode { fixed, proportional };
  Mode mode = Mode::proportional;
  long n = 50;                 // fixed mode
  double step = 0.01;          // proportional mode, in standardized units
  long n_min = 50;
  long n_max = 1L << 20;
  PathScheme scheme = PathScheme::midpoint;

  static GridSpec fixed_n(long n, PathScheme scheme = PathScheme::midpoint) {
    GridSpec g;
    g.mode = Mode::fixed;
    g.n = n;
    g.scheme = scheme;
    return g;
  }
  static GridSpec proportional(double step = 0.01, long n_min = 50,
                               long n_max = 1L << 20,
                               PathScheme scheme = PathScheme::midpoint) {
    GridSpec g;
    g.mode = Mode::proportional;
    g.step = step;
    g.n_min = n_min;
    g.n_max = n_max;
    g.scheme = scheme;
    return g;
  }

  void validate() const {
    if (mode == Mode::fixed) {
      if (n < 1) throw Error("grid: fixed point count must be positive");
    } else {
      if (!(step > 0.0)) throw Error("grid: step must be positive");
      if (n_min < 1 || n_max < n_min) throw Error("grid: need 1 <= n_min <= n_max");
    }
  }

  long initial_points(std::span<const double> x0, std::span<const double> x) const {
    validate();
    if (mode == Mode::fixed) return n;
    const double span = linf_distance(x0, x);
    const long by_step = static_cast<long>(std::ceil(std::min(
        span / step, static_cast<double>(n_max))));
    return std::clamp(by_step, n_min, n_max);
  }

  long ceiling() const { return mode == Mode::fixed ? n : n_max; }
};

struct AttributionResult {
  Vector contributions;          // per input feature, units of output
  double bias_contribution = 0;  // zero for a pure path pass; used in chaining
  Vector baseline_shares;        // empty unless redistribution was requested
  double predicted = 0;
  double baseline_value = 0;     // a, the link value at the root point
  double reconstruction_error = 0;
  long grid_points_used = 0;
};

/// The n+1 points x0 + (j/n)(x - x0), j = 0..n.
inline std::vector<Vector> build_path(std::span<const double> x0,
                                      std::span<const double> x, long n) {
  if (x0.size() != x.size()) throw DimensionError("build_path: length mismatch");
  if (n < 1) throw Error("build_path: need at least one step");
  std::vector<Vector> points;
  points.reserve(static_cast<std::size_t>(n) + 1);
  for (long j = 0; j <= n; ++j) {
    Vector p(x.size());
    const double t = static_cast<double>(j) / static_cast<double>(n);
    for (std::size_t k = 0; k < x.size(); ++k) p[k] = x0[k] + t * (x[k] - x0[k]);
    points.push_back(std::move(p));
  }
  return points;
}

namespace detail {

/// Mean link derivative along the affine preactivation segment y0 -> y1.
/// For links with piecewise-constant derivative the n -> inf limit is exact:
/// (G(y1) - G(y0)) / (y1 - y0), which also absorbs regime flips along the
/// path. Otherwise a Riemann sum with the requested scheme: the preactivation
/// at path point j is itself affine in j, so each evaluation is O(1).
inline double path_mean_deriv(const LinkFunction& link, double y0, double y1, long n,
                              PathScheme scheme) {
  if (is_trivial(link)) {
    if (y1 == y0) return link_deriv(link, y0);
    return (link_eval(link, y1) - link_eval(link, y0)) / (y1 - y0);
  }
  const double offset = scheme == PathScheme::midpoint ? 0.5 : 0.0;
  const double dy = y1 - y0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double s = 0.0;
  for (long j = 0; j < n; ++j)
    s += link_deriv(link, y0 + ((static_cast<double>(j) + offset) * inv_n) * dy);
  return s * inv_n;
}

/// Per-feature contributions of the discretized path integral from x0 to x.
/// rho_k = beta_k (x_k - x0_k) * mean_g, the factored form of
/// sum_j g(beta' p_j + bias) beta_k dx_k with dx_k = (x_k - x0_k)/n.
inline Vector path_contributions(std::span<const double> x0, std::span<const double> x,
                                 std::span<const double> beta, double bias,
                                 const LinkFunction& link, long n, PathScheme scheme) {
  if (x0.size() != x.size() || x.size() != beta.size())
    throw DimensionError("path_contributions: length mismatch");
  if (n < 1) throw Error("path_contributions: need at least one step");
  const double y0 = dot(beta, x0) + bias;
  const double y1 = dot(beta, x) + bias;
  const double mean_g = path_mean_deriv(link, y0, y1, n, scheme);
  Vector rho(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    rho[k] = beta[k] * (x[k] - x0[k]) * mean_g;
  return rho;
}

}  // namespace detail

/// Splits the baseline level a across features proportionally to |beta_i|.
/// Shares sum to a exactly; absolute values keep the weights positive under
/// mixed signs.
inline Vector redistribute_baseline(double a, std::span<const double> beta) {
  Vector shares(beta.size(), 0.0);
  if (a == 0.0) return shares;
  double total = 0.0;
  for (double b : beta) total += std::abs(b);
  if (total == 0.0)
    throw DegenerateWeights("cannot redistribute a nonzero baseline over all-zero weights");
  for (std::size_t i = 0; i < beta.size(); ++i) shares[i] = a * std::abs(beta[i]) / total;
  // Force exact additivity: fold the rounding remainder into the largest share.
  double acc = 0.0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    acc += shares[i];
    if (std::abs(beta[i]) > std::abs(beta[largest])) largest = i;
  }
  shares[largest] += a - acc;
  return shares;
}

/// Stepwise first-order Taylor attribution along the straight path from the
/// root point to the observation. The reconstruction error
/// |sum_k rho_k - (G(x) - a)| is checked against tol; in proportional mode
/// the grid doubles until the tolerance is met or n_max is hit.
inline AttributionResult stepwise_attribute(std::span<const double> x,
                                            std::span<const double> beta, double bias,
                                            const LinkFunction& link,
                                            const RootPoint& root, const GridSpec& grid,
                                            double tol, bool redistribute = false) {
  if (x.size() != beta.size() || x.size() != root.theta.size())
    throw DimensionError("stepwise_attribute: length mismatch");
  if (!all_finite(x)) throw NonFiniteInput("stepwise_attribute: input must be finite");

  AttributionResult res;
  res.predicted = link_eval(link, dot(beta, x) + bias);
  res.baseline_value = root.achieved;
  const double target_diff = res.predicted - res.baseline_value;

  long n = grid.initial_points(root.theta, x);
  const long cap = grid.ceiling();
  while (true) {
    res.contributions =
        detail::path_contributions(root.theta, x, beta, bias, link, n, grid.scheme);
    res.reconstruction_error = std::abs(sum(res.contributions) - target_diff);
    res.grid_points_used = n;
    if (res.reconstruction_error <= tol) break;
    if (n >= cap)
      throw ToleranceNotReached(n, res.reconstruction_error, "stepwise_attribute");
    n = std::min(cap, n * 2);
  }
  if (redistribute)
    res.baseline_shares = redistribute_baseline(res.baseline_value, beta);
  return res;
}

/// Riemann approximation of integrated gradients along the same straight
/// path, with a caller-supplied baseline. With baseline = root point and the
/// same scheme and n this is the identical discretized integral, so the
/// output matches stepwise_attribute bit for bit.
inline Vector integrated_gradients_reference(std::span<const double> x,
                                             std::span<const double> baseline,
                                             std::span<const double> beta, double bias,
                                             const LinkFunction& link, long n,
                                             PathScheme scheme = PathScheme::midpoint) {
  return detail::path_contributions(baseline, x, beta, bias, link, n, scheme);
}

}  // namespace dexpl
