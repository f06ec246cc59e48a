#pragma once

#include "eddy/kernels.hpp"
#include "eddy/targets.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eddy {

/// dx = mu_t(x) dt + sigma_t dW. `score` is the score of the marginal the
/// field transports along, when it is known (analytically or via Tweedie).
struct DriftField {
  std::function<Vec(const Vec&, double)> drift;
  std::function<double(double)> volatility;
  std::function<Vec(const Vec&, double)> score;
};

/// Reverse-time VP SDE toward gm: mu = 1/2 beta x + beta grad log p_t,
/// sigma = sqrt(beta), with beta the schedule rate at reversed time.
DriftField vp_reverse_drift(const GaussianMixture& gm, const VPSchedule& schedule);

/// Exact OT flow-matching velocity E[x_1 - x_0 | x_t] for a Gaussian-mixture
/// target and N(0, I) source. Deterministic (sigma = 0); singular at t = 1.
DriftField otfm_drift(const GaussianMixture& gm);

/// Tweedie: grad log p_t(x) = (t v - x) / (1 - t). Throws std::domain_error
/// for t >= 1.
Vec score_from_velocity(const Vec& velocity, const Vec& x, double t);

/// n particles of dimension d at sampler time `time`. `seed` and `step`
/// record where the randomness that produced the batch came from.
struct ParticleBatch {
  std::vector<Vec> positions;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  std::size_t size() const { return positions.size(); }
  Eigen::Index dim() const {
    return positions.empty() ? 0 : positions.front().size();
  }
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(std::size_t particle, double time, const std::string& what)
      : std::runtime_error(what + " (particle " + std::to_string(particle) +
                           ", t = " + std::to_string(time) + ")"),
        particle_(particle),
        time_(time) {}

  std::size_t particle() const { return particle_; }
  double time() const { return time_; }

 private:
  std::size_t particle_;
  double time_;
};

/// One Euler-Maruyama step with precomputed drifts:
///   x <- x + (mu + psi) dt + sigma sqrt(dt) xi.
/// `guidance` is either empty or holds one vector per particle. Noise is drawn
/// in particle-index order, d normals per particle, and only when sigma > 0.
ParticleBatch euler_maruyama_step(const ParticleBatch& batch,
                                  std::span<const Vec> drifts,
                                  std::span<const Vec> guidance,
                                  double volatility, double dt, Rng& rng);

/// Same, evaluating the drift field at the pre-step positions.
ParticleBatch euler_maruyama_step(const ParticleBatch& batch,
                                  const DriftField& field,
                                  std::span<const Vec> guidance, double dt,
                                  Rng& rng);

}  // namespace eddy
