#pragma once

#include "eddy/kernels.hpp"

#include <Eigen/Dense>

namespace eddy {

/// Mixture of isotropic Gaussians sharing one component variance.
/// Centers are stored one per row (m x d).
class GaussianMixture {
 public:
  GaussianMixture(Eigen::MatrixXd centers, Vec weights, double variance);

  Eigen::Index dim() const { return centers_.cols(); }
  Eigen::Index components() const { return centers_.rows(); }
  const Eigen::MatrixXd& centers() const { return centers_; }
  const Vec& weights() const { return weights_; }
  double variance() const { return variance_; }

  double log_density(const Vec& x) const;
  Vec score(const Vec& x) const;
  /// Posterior component probabilities at x (softmax of log w + log N).
  Vec responsibilities(const Vec& x) const;

  /// Ancestral sampling; one sample per row.
  Eigen::MatrixXd sample(Eigen::Index n, Rng& rng) const;

 private:
  void check_point(const Vec& x) const;
  // log w_l - |x - c_l|^2 / (2 var), -inf for zero weights
  void component_logits(const Vec& x, Vec& out) const;

  Eigen::MatrixXd centers_;
  Vec weights_;
  Vec log_weights_;
  double variance_;
};

/// m equal-weight components at radius * (sin(2 pi l / m), cos(2 pi l / m)).
GaussianMixture ring_mixture(int m, double radius, double variance);

/// Variance-preserving noise schedule in sampler time: t = 0 is the prior,
/// t = 1 the data. The rate is linear in reversed time s = 1 - t,
///   beta(s) = beta_min + s (beta_max - beta_min),
/// and the signal coefficient is alpha(t) = exp(-1/2 int_0^{1-t} beta).
class VPSchedule {
 public:
  VPSchedule() = default;
  VPSchedule(double beta_min, double beta_max);

  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }

  /// beta at reversed time 1 - t.
  double rate(double t) const;
  /// int_0^{1-t} beta(u) du.
  double integrated_rate(double t) const;
  double alpha(double t) const;
  /// 1 - alpha(t)^2.
  double noise_variance(double t) const;

 private:
  double beta_min_ = 0.1;
  double beta_max_ = 20.0;
};

/// Exact marginal p_t of the VP noising process started from gm.
GaussianMixture noised_mixture(const GaussianMixture& gm,
                               const VPSchedule& schedule, double t);

/// Pushes a marginal known at t_from through the VP transition kernel to an
/// earlier (noisier) time t_to <= t_from.
GaussianMixture renoise_mixture(const GaussianMixture& marginal,
                                const VPSchedule& schedule, double t_from,
                                double t_to);

/// Marginal of x_t = t x_1 + (1 - t) x_0 with x_0 ~ N(0, I), x_1 ~ gm.
GaussianMixture otfm_marginal(const GaussianMixture& gm, double t);

}  // namespace eddy
