#pragma once

#include "eddy/dynamics.hpp"
#include "eddy/guidance.hpp"
#include "eddy/targets.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace eddy {

enum class Method { iid, eddy, pg };
enum class DynamicsMode { vp_ddpm, ot_fm };

std::string_view to_string(Method m);
std::string_view to_string(DynamicsMode m);

inline constexpr int kDefaultSteps = 100;
inline constexpr int kDefaultParticles = 5;

struct RunConfig {
  GuidanceConfig guidance;
  Method method = Method::iid;
  int steps = kDefaultSteps;
  int particles = kDefaultParticles;
  DynamicsMode dynamics = DynamicsMode::vp_ddpm;
  VPSchedule schedule;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Drift field used for `config.dynamics` toward `target`.
DriftField make_field(const RunConfig& config, const GaussianMixture& target);

/// One explicit step of the guided sampler from batch.time = step / T.
/// Scores, drifts and neighbour vectors are taken at the pre-step positions.
/// Guidance is computed only while t < stop_ratio and the method is not iid.
ParticleBatch guided_step(const RunConfig& config, const DriftField& field,
                          const ParticleBatch& batch, Rng& rng);

/// Runs the remaining steps from `initial` to t = 1.
ParticleBatch integrate(const RunConfig& config, const GaussianMixture& target,
                        ParticleBatch initial, Rng& rng);

/// Draws n i.i.d. N(0, I) particles from rng and integrates them to t = 1.
/// The batch seed lineage is config.seed.
ParticleBatch sample_batch(const RunConfig& config, const GaussianMixture& target,
                           Rng& rng);

/// Seed for batch `index` of a run with base seed `base_seed`.
std::uint64_t batch_seed(std::uint64_t base_seed, std::uint64_t index);

/// Independent batches with seeds batch_seed(base_seed, b). `threads` only
/// changes scheduling; output is identical for any thread count.
std::vector<ParticleBatch> sample_many(const RunConfig& config,
                                       const GaussianMixture& target,
                                       int n_batches, std::uint64_t base_seed,
                                       int threads = 1);

}  // namespace eddy
