#include "eddy/sampler.hpp"

#include "eddy/seeding.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace eddy {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::iid: return "iid";
    case Method::eddy: return "eddy";
    case Method::pg: return "pg";
  }
  return "unknown";
}

std::string_view to_string(DynamicsMode m) {
  switch (m) {
    case DynamicsMode::vp_ddpm: return "vp_ddpm";
    case DynamicsMode::ot_fm: return "ot_fm";
  }
  return "unknown";
}

void RunConfig::validate() const {
  guidance.validate();
  if (steps < 1) {
    throw std::invalid_argument("RunConfig: steps must be at least 1");
  }
  if (particles < 1) {
    throw std::invalid_argument("RunConfig: need at least one particle");
  }
  if (method != Method::iid && particles < 2) {
    throw std::invalid_argument("RunConfig: interacting methods need at least two particles");
  }
}

DriftField make_field(const RunConfig& config, const GaussianMixture& target) {
  switch (config.dynamics) {
    case DynamicsMode::vp_ddpm: return vp_reverse_drift(target, config.schedule);
    case DynamicsMode::ot_fm: return otfm_drift(target);
  }
  throw std::invalid_argument("make_field: unknown dynamics mode");
}

ParticleBatch guided_step(const RunConfig& config, const DriftField& field,
                          const ParticleBatch& batch, Rng& rng) {
  const auto steps = static_cast<std::uint64_t>(config.steps);
  if (batch.step >= steps) {
    throw std::invalid_argument("guided_step: batch already at t = 1");
  }
  const double dt = 1.0 / static_cast<double>(config.steps);
  const double t = static_cast<double>(batch.step) / static_cast<double>(config.steps);
  const std::size_t n = batch.size();

  std::vector<Vec> drifts;
  drifts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      drifts.push_back(field.drift(batch.positions[i], t));
    } catch (const std::domain_error& e) {
      throw IntegrationError(i, t, e.what());
    }
  }
  const double volatility = field.volatility(t);

  const GuidanceConfig& g = config.guidance;
  const bool active = config.method != Method::iid && g.weight != 0.0 &&
                      t < g.stop_ratio;
  std::vector<Vec> guidance;
  if (active) {
    if (config.method == Method::pg) {
      guidance = pg_guidance(batch.positions, g.gamma);
    } else {
      std::vector<Vec> scores;
      scores.reserve(n);
      for (const Vec& x : batch.positions) {
        scores.push_back(field.score(x, t));
      }
      std::vector<Vec> neighbors;
      neighbors.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        if (g.neighbor_mode == NeighborMode::drift) {
          neighbors.push_back(drifts[j]);
        } else {
          neighbors.push_back(volatility * scores[j]);
        }
      }
      if (const auto* approx = std::get_if<ApproximateEstimator>(&g.estimator)) {
        Rng key_rng(derive_seed(batch.seed, {batch.step}));
        guidance = eddy_approx_guidance(batch.positions, scores, neighbors,
                                        rbf_black_box(g.gamma), approx->epsilon,
                                        approx->probes, key_rng);
      } else {
        guidance = eddy_rbf_guidance(batch.positions, scores, neighbors, g.gamma);
      }
    }
    for (Vec& psi : guidance) psi *= g.weight;
  }

  ParticleBatch next =
      euler_maruyama_step(batch, drifts, guidance, volatility, dt, rng);
  next.time = static_cast<double>(next.step) / static_cast<double>(config.steps);
  return next;
}

ParticleBatch integrate(const RunConfig& config, const GaussianMixture& target,
                        ParticleBatch initial, Rng& rng) {
  config.validate();
  if (initial.size() != static_cast<std::size_t>(config.particles)) {
    throw std::invalid_argument("integrate: batch size does not match config");
  }
  if (initial.dim() != target.dim()) {
    throw std::invalid_argument("integrate: batch dimension does not match target");
  }
  const DriftField field = make_field(config, target);
  ParticleBatch batch = std::move(initial);
  while (batch.step < static_cast<std::uint64_t>(config.steps)) {
    batch = guided_step(config, field, batch, rng);
  }
  return batch;
}

ParticleBatch sample_batch(const RunConfig& config, const GaussianMixture& target,
                           Rng& rng) {
  config.validate();
  ParticleBatch batch;
  batch.seed = config.seed;
  batch.positions.reserve(static_cast<std::size_t>(config.particles));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < config.particles; ++i) {
    Vec x(target.dim());
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = normal(rng);
    batch.positions.push_back(std::move(x));
  }
  return integrate(config, target, std::move(batch), rng);
}

std::uint64_t batch_seed(std::uint64_t base_seed, std::uint64_t index) {
  return derive_seed(base_seed, {0x6261746368ull, index});
}

std::vector<ParticleBatch> sample_many(const RunConfig& config,
                                       const GaussianMixture& target,
                                       int n_batches, std::uint64_t base_seed,
                                       int threads) {
  if (n_batches < 1) {
    throw std::invalid_argument("sample_many: need at least one batch");
  }
  config.validate();
  std::vector<ParticleBatch> out(static_cast<std::size_t>(n_batches));
  auto run_one = [&](std::size_t b) {
    RunConfig local = config;
    local.seed = batch_seed(base_seed, b);
    Rng rng(local.seed);
    out[b] = sample_batch(local, target, rng);
  };

  const int workers = std::clamp(threads, 1, n_batches);
  if (workers == 1) {
    for (std::size_t b = 0; b < out.size(); ++b) run_one(b);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < out.size(); b = next++) {
        try {
          run_one(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = out.size();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace eddy
