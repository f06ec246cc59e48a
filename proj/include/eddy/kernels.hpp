#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>

namespace eddy {

using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double kDefaultFdEpsilon = 1e-3;
inline constexpr int kDefaultHutchinsonProbes = 25;

/// Exact derivative quantities of k(x, y) = exp(-|x - y|^2 / gamma) with
/// respect to the first argument.
///
/// The Hessian is never stored. It has the rank-one-plus-identity form
///   H = a (-I + (2/gamma) delta delta^T),   a = (2/gamma) k,
/// so hessian_apply() costs O(d).
struct RbfBundle {
  double value = 1.0;
  double gamma = 1.0;
  Vec delta;           // x - y
  Vec gradient;        // dk/dx = -(2/gamma) k delta
  double laplacian = 0.0;

  Eigen::Index dim() const { return delta.size(); }

  /// Scalar a of the Hessian structure above.
  double hessian_scale() const { return 2.0 / gamma * value; }

  /// Returns H v.
  Vec hessian_apply(const Vec& v) const;
};

double rbf_eval(const Vec& x, const Vec& y, double gamma);

RbfBundle rbf_bundle(const Vec& x, const Vec& y, double gamma);

using KernelValueFn = std::function<double(const Vec&, const Vec&)>;
using KernelGradientFn = std::function<Vec(const Vec&, const Vec&)>;

/// A kernel known only through evaluations: its value at a point pair and its
/// gradient with respect to the first argument.
struct BlackBoxKernel {
  KernelValueFn value;
  KernelGradientFn gradient;
};

/// The RBF kernel wrapped as a black box, used to check the estimators against
/// the closed forms.
BlackBoxKernel rbf_black_box(double gamma);

/// Central-difference Hessian-vector product of k(., y) at x along v:
///   [grad k(x + eps v, y) - grad k(x - eps v, y)] / (2 eps).
Vec fd_hvp(const BlackBoxKernel& kernel, const Vec& x, const Vec& y,
           const Vec& v, double epsilon = kDefaultFdEpsilon);

/// Hutchinson estimate of the Laplacian of k(., y) at x using `probes`
/// Rademacher second differences with step epsilon. Uses only kernel values.
double hutchinson_laplacian(const KernelValueFn& value, const Vec& x,
                            const Vec& y, double epsilon, int probes,
                            Rng& rng);

/// Fills `out` with independent fair signs drawn from rng.
void rademacher_fill(Vec& out, Rng& rng);

}  // namespace eddy
