#include "eddy/targets.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace eddy {

namespace {

void check_time(double t, const char* who) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::domain_error(std::string(who) + ": time " + std::to_string(t) +
                            " outside [0, 1]");
  }
}

}  // namespace

GaussianMixture::GaussianMixture(Eigen::MatrixXd centers, Vec weights,
                                 double variance)
    : centers_(std::move(centers)),
      weights_(std::move(weights)),
      variance_(variance) {
  if (centers_.rows() < 1 || centers_.cols() < 1) {
    throw std::invalid_argument("GaussianMixture: need at least one component");
  }
  if (weights_.size() != centers_.rows()) {
    throw std::invalid_argument("GaussianMixture: weight count mismatch");
  }
  if (!(variance_ > 0.0) || !std::isfinite(variance_)) {
    throw std::invalid_argument("GaussianMixture: variance must be positive");
  }
  if (!centers_.allFinite() || !weights_.allFinite()) {
    throw std::invalid_argument("GaussianMixture: non-finite parameters");
  }
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("GaussianMixture: negative weight");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  }
  log_weights_.resize(weights_.size());
  for (Eigen::Index l = 0; l < weights_.size(); ++l) {
    log_weights_[l] = weights_[l] > 0.0
                          ? std::log(weights_[l])
                          : -std::numeric_limits<double>::infinity();
  }
}

void GaussianMixture::check_point(const Vec& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("GaussianMixture: point has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(dim()));
  }
}

void GaussianMixture::component_logits(const Vec& x, Vec& out) const {
  out.resize(components());
  const double inv2var = 0.5 / variance_;
  for (Eigen::Index l = 0; l < components(); ++l) {
    const double sq = (x.transpose() - centers_.row(l)).squaredNorm();
    out[l] = log_weights_[l] - sq * inv2var;
  }
}

double GaussianMixture::log_density(const Vec& x) const {
  check_point(x);
  Vec logits;
  component_logits(x, logits);
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  const double d = static_cast<double>(dim());
  return lse - 0.5 * d * std::log(2.0 * std::numbers::pi * variance_);
}

Vec GaussianMixture::responsibilities(const Vec& x) const {
  check_point(x);
  Vec logits;
  component_logits(x, logits);
  const double top = logits.maxCoeff();
  Vec rho = (logits.array() - top).exp().matrix();
  rho /= rho.sum();
  return rho;
}

Vec GaussianMixture::score(const Vec& x) const {
  const Vec rho = responsibilities(x);
  // sum_l rho_l (c_l - x) / var, with sum_l rho_l = 1
  Vec mean = centers_.transpose() * rho;
  return (mean - x) / variance_;
}

Eigen::MatrixXd GaussianMixture::sample(Eigen::Index n, Rng& rng) const {
  if (n < 0) {
    throw std::invalid_argument("GaussianMixture::sample: negative count");
  }
  std::discrete_distribution<Eigen::Index> pick(weights_.data(),
                                                weights_.data() + weights_.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(variance_);
  Eigen::MatrixXd out(n, dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index l = pick(rng);
    for (Eigen::Index k = 0; k < dim(); ++k) {
      out(i, k) = centers_(l, k) + sd * normal(rng);
    }
  }
  return out;
}

GaussianMixture ring_mixture(int m, double radius, double variance) {
  if (m < 1) {
    throw std::invalid_argument("ring_mixture: need at least one component");
  }
  Eigen::MatrixXd centers(m, 2);
  for (int l = 0; l < m; ++l) {
    const double angle = 2.0 * std::numbers::pi * l / m;
    centers(l, 0) = radius * std::sin(angle);
    centers(l, 1) = radius * std::cos(angle);
  }
  return GaussianMixture(std::move(centers), Vec::Constant(m, 1.0 / m),
                         variance);
}

VPSchedule::VPSchedule(double beta_min, double beta_max)
    : beta_min_(beta_min), beta_max_(beta_max) {
  if (!(beta_min > 0.0) || !(beta_max >= beta_min) || !std::isfinite(beta_max)) {
    throw std::invalid_argument("VPSchedule: need 0 < beta_min <= beta_max");
  }
}

double VPSchedule::rate(double t) const {
  check_time(t, "VPSchedule::rate");
  const double s = 1.0 - t;
  return beta_min_ + s * (beta_max_ - beta_min_);
}

double VPSchedule::integrated_rate(double t) const {
  check_time(t, "VPSchedule::integrated_rate");
  const double s = 1.0 - t;
  return beta_min_ * s + 0.5 * (beta_max_ - beta_min_) * s * s;
}

double VPSchedule::alpha(double t) const {
  return std::exp(-0.5 * integrated_rate(t));
}

double VPSchedule::noise_variance(double t) const {
  // 1 - exp(-B) without cancellation near t = 1
  return -std::expm1(-integrated_rate(t));
}

GaussianMixture noised_mixture(const GaussianMixture& gm,
                               const VPSchedule& schedule, double t) {
  check_time(t, "noised_mixture");
  const double a = schedule.alpha(t);
  const double var = a * a * gm.variance() + schedule.noise_variance(t);
  return GaussianMixture(a * gm.centers(), gm.weights(), var);
}

GaussianMixture renoise_mixture(const GaussianMixture& marginal,
                                const VPSchedule& schedule, double t_from,
                                double t_to) {
  check_time(t_from, "renoise_mixture");
  check_time(t_to, "renoise_mixture");
  if (t_to > t_from) {
    throw std::invalid_argument("renoise_mixture: can only move toward the prior");
  }
  // alpha(t_to) / alpha(t_from) = exp(-1/2 int_{1-t_from}^{1-t_to} beta)
  const double log_ratio =
      -0.5 * (schedule.integrated_rate(t_to) - schedule.integrated_rate(t_from));
  const double ratio = std::exp(log_ratio);
  const double added = -std::expm1(2.0 * log_ratio);
  return GaussianMixture(ratio * marginal.centers(), marginal.weights(),
                         ratio * ratio * marginal.variance() + added);
}

GaussianMixture otfm_marginal(const GaussianMixture& gm, double t) {
  check_time(t, "otfm_marginal");
  const double var = t * t * gm.variance() + (1.0 - t) * (1.0 - t);
  return GaussianMixture(t * gm.centers(), gm.weights(), var);
}

}  // namespace eddy
