#pragma once

#include "eddy/kernels.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace eddy {

/// Pairs whose kernel value falls below this contribute nothing at double
/// precision and are skipped.
inline constexpr double kNegligibleKernel = 1e-30;

enum class NeighborMode {
  drift,        // v_j = mu_t(x_j)
  sigma_score,  // v_j = sigma_t grad log p_t(x_j)
};

struct ExactRbf {};

struct ApproximateEstimator {
  double epsilon = kDefaultFdEpsilon;
  int probes = kDefaultHutchinsonProbes;
};

using GuidanceEstimator = std::variant<ExactRbf, ApproximateEstimator>;

struct GuidanceConfig {
  double weight = 0.0;      // w_g
  double gamma = 1.0;       // RBF bandwidth
  double stop_ratio = 1.0;  // guidance active while t < stop_ratio
  NeighborMode neighbor_mode = NeighborMode::drift;
  GuidanceEstimator estimator = ExactRbf{};

  void validate() const;
};

/// Applies the pair matrix A = v r^T - r v^T to s without forming it:
///   A s = <r, s> v - <v, s> r.
/// A is anti-symmetric and its row-wise divergence (for r = -grad k and v
/// independent of x) is +K v, so div A + A s is a Stein field.
Vec antisym_apply(const Vec& r, const Vec& v, const Vec& s);

/// K v with K = Hess k - (Lap k) I, the divergence-free matrix kernel of the
/// RBF:  (2k/gamma) [ (d - 1 - (2/gamma)|delta|^2) v + (2/gamma) <delta, v> delta ].
Vec divfree_apply(const RbfBundle& bundle, const Vec& v);

/// Closed-form EDDY field for the RBF kernel. For each i,
///   psi_i = 2 / (gamma (n - 1)) sum_{j != i} k_ij (Cd_ij delta_ij + Cv_ij v_j)
/// with Cd = (2/gamma)<delta, v> - <v, s_i> and
///      Cv = d - 1 - (2/gamma)|delta|^2 + <delta, s_i>.
std::vector<Vec> eddy_rbf_guidance(std::span<const Vec> positions,
                                   std::span<const Vec> scores,
                                   std::span<const Vec> neighbor_vectors,
                                   double gamma);

/// EDDY field for a kernel known only through values and gradients: the
/// Hessian-vector product comes from fd_hvp and the Laplacian from
/// hutchinson_laplacian. One 64-bit key is drawn from rng per call; each pair
/// (i, j) then gets its own probe stream derived from (key, i, j).
std::vector<Vec> eddy_approx_guidance(std::span<const Vec> positions,
                                      std::span<const Vec> scores,
                                      std::span<const Vec> neighbor_vectors,
                                      const BlackBoxKernel& kernel,
                                      double epsilon, int probes, Rng& rng);

/// Particle-guidance baseline: mean repulsive direction -grad k over
/// neighbours.
std::vector<Vec> pg_guidance(std::span<const Vec> positions, double gamma);

using MatrixField = std::function<Eigen::MatrixXd(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;

/// Matrix Stein operator div F + F grad log p, with the row-wise divergence
/// (div F)_a = sum_b d F_ab / d x_b taken by central differences.
Vec stein_apply_numeric(const MatrixField& matrix_field,
                        const VectorField& log_density_grad, const Vec& x,
                        double fd_step);

}  // namespace eddy
