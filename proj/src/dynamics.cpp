#include "eddy/dynamics.hpp"

#include <cmath>
#include <random>

namespace eddy {

DriftField vp_reverse_drift(const GaussianMixture& gm,
                            const VPSchedule& schedule) {
  DriftField field;
  field.score = [gm, schedule](const Vec& x, double t) {
    return noised_mixture(gm, schedule, t).score(x);
  };
  field.drift = [gm, schedule](const Vec& x, double t) -> Vec {
    const double beta = schedule.rate(t);
    return 0.5 * beta * x + beta * noised_mixture(gm, schedule, t).score(x);
  };
  field.volatility = [schedule](double t) { return std::sqrt(schedule.rate(t)); };
  return field;
}

namespace {

Vec otfm_velocity(const GaussianMixture& gm, const Vec& x, double t) {
  if (!(t >= 0.0) || !(t < 1.0)) {
    throw std::domain_error("otfm_drift: velocity is singular at t = 1 (t = " +
                            std::to_string(t) + ")");
  }
  // x_t | l ~ N(t c_l, nu I), nu = t^2 var + (1 - t)^2
  const GaussianMixture marginal = otfm_marginal(gm, t);
  const Vec rho = marginal.responsibilities(x);
  const Vec mean_center = gm.centers().transpose() * rho;
  const double gain = t * gm.variance() / marginal.variance();
  const Vec expected_target = mean_center + gain * (x - t * mean_center);
  return (expected_target - x) / (1.0 - t);
}

}  // namespace

DriftField otfm_drift(const GaussianMixture& gm) {
  DriftField field;
  field.drift = [gm](const Vec& x, double t) { return otfm_velocity(gm, x, t); };
  field.volatility = [](double) { return 0.0; };
  field.score = [gm](const Vec& x, double t) {
    return score_from_velocity(otfm_velocity(gm, x, t), x, t);
  };
  return field;
}

Vec score_from_velocity(const Vec& velocity, const Vec& x, double t) {
  if (!(t < 1.0) || !(t >= 0.0)) {
    throw std::domain_error("score_from_velocity: requires t in [0, 1), got " +
                            std::to_string(t));
  }
  if (velocity.size() != x.size()) {
    throw std::invalid_argument("score_from_velocity: dimension mismatch");
  }
  return (t * velocity - x) / (1.0 - t);
}

ParticleBatch euler_maruyama_step(const ParticleBatch& batch,
                                  std::span<const Vec> drifts,
                                  std::span<const Vec> guidance,
                                  double volatility, double dt, Rng& rng) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("euler_maruyama_step: dt must be positive");
  }
  const std::size_t n = batch.size();
  if (drifts.size() != n) {
    throw std::invalid_argument("euler_maruyama_step: one drift per particle required");
  }
  if (!guidance.empty() && guidance.size() != n) {
    throw std::invalid_argument("euler_maruyama_step: one guidance vector per particle required");
  }
  if (!(volatility >= 0.0) || !std::isfinite(volatility)) {
    throw IntegrationError(0, batch.time, "invalid volatility");
  }
  ParticleBatch next = batch;
  next.time = batch.time + dt;
  next.step = batch.step + 1;
  const double noise_scale = volatility * std::sqrt(dt);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!drifts[i].allFinite()) {
      throw IntegrationError(i, batch.time, "non-finite drift");
    }
    Vec& x = next.positions[i];
    x += dt * drifts[i];
    if (!guidance.empty()) {
      if (!guidance[i].allFinite()) {
        throw IntegrationError(i, batch.time, "non-finite guidance");
      }
      x += dt * guidance[i];
    }
    if (noise_scale > 0.0) {
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        x[k] += noise_scale * normal(rng);
      }
    }
    if (!x.allFinite()) {
      throw IntegrationError(i, batch.time, "non-finite state after step");
    }
  }
  return next;
}

ParticleBatch euler_maruyama_step(const ParticleBatch& batch,
                                  const DriftField& field,
                                  std::span<const Vec> guidance, double dt,
                                  Rng& rng) {
  std::vector<Vec> drifts;
  drifts.reserve(batch.size());
  for (const Vec& x : batch.positions) {
    drifts.push_back(field.drift(x, batch.time));
  }
  return euler_maruyama_step(batch, drifts, guidance,
                             field.volatility(batch.time), dt, rng);
}

}  // namespace eddy
