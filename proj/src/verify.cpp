#include "eddy/verify.hpp"

#include "eddy/dynamics.hpp"
#include "eddy/experiment.hpp"
#include "eddy/report_io.hpp"
#include "eddy/sampler.hpp"
#include "eddy/scaling.hpp"
#include "eddy/seeding.hpp"
#include "eddy/stats.hpp"
#include "eddy/targets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

namespace eddy {

namespace {

using nlohmann::json;

Vec normal_vec(Eigen::Index d, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = normal(rng);
  return v;
}

double rel_err(const Vec& got, const Vec& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : seed_(seed) {}

  Rng rng(std::uint64_t label) const { return Rng(derive_seed(seed_, {label})); }

  // value <= threshold passes
  void at_most(std::string id, double value, double threshold, std::string detail = {}) {
    results_.push_back({std::move(id), value <= threshold, value, threshold, std::move(detail)});
  }

  void within(std::string id, double value, double lo, double hi, std::string detail) {
    results_.push_back({std::move(id), value >= lo && value <= hi, value, hi, std::move(detail)});
  }

  void holds(std::string id, bool ok, std::string detail = {}) {
    results_.push_back({std::move(id), ok, ok ? 1.0 : 0.0, 1.0, std::move(detail)});
  }

  std::vector<CheckResult> take() { return std::move(results_); }

 private:
  std::uint64_t seed_;
  std::vector<CheckResult> results_;
};

std::string describe(const char* what, double value) {
  return std::string(what) + " = " + format_double(value);
}

// ---- kernels --------------------------------------------------------------

void kernel_checks(Suite& suite) {
  Rng rng = suite.rng(1);
  double asym = 0.0;
  double grad_err = 0.0;
  double hvp_err = 0.0;
  double lap_err = 0.0;
  for (int d : {1, 2, 8, 64}) {
    for (int rep = 0; rep < 10; ++rep) {
      const double gamma = 0.5 + rep * 0.3;
      const Vec x = normal_vec(d, std::sqrt(gamma / d), rng);
      const Vec y = normal_vec(d, std::sqrt(gamma / d), rng);
      asym = std::max(asym, std::abs(rbf_eval(x, y, gamma) - rbf_eval(y, x, gamma)));

      const RbfBundle b = rbf_bundle(x, y, gamma);
      Vec fd(d);
      Vec shifted = x;
      for (int k = 0; k < d; ++k) {
        shifted[k] = x[k] + 1e-5;
        const double up = rbf_eval(shifted, y, gamma);
        shifted[k] = x[k] - 1e-5;
        const double down = rbf_eval(shifted, y, gamma);
        shifted[k] = x[k];
        fd[k] = (up - down) / 2e-5;
      }
      grad_err = std::max(grad_err, rel_err(fd, b.gradient));

      const Vec v = normal_vec(d, 1.0, rng);
      hvp_err = std::max(hvp_err,
                         rel_err(fd_hvp(rbf_black_box(gamma), x, y, v, 1e-4), b.hessian_apply(v)));

      double trace = 0.0;
      for (int k = 0; k < d; ++k) trace += b.hessian_apply(Vec::Unit(d, k))[k];
      lap_err = std::max(lap_err, rel_err(trace, b.laplacian));
    }
  }
  suite.at_most("kernels.symmetry", asym, 0.0, "max |k(x,y) - k(y,x)|");
  suite.at_most("kernels.gradient_fd", grad_err, 1e-6, "central differences, step 1e-5, d in {1,2,8,64}");
  suite.at_most("kernels.hessian_fd_hvp", hvp_err, 1e-5, "fd_hvp with eps 1e-4");
  suite.at_most("kernels.laplacian_trace", lap_err, 1e-10, "sum of e_k^T H e_k");

  // 50 runs of m = 25 probes at several random points.
  double worst_z = 0.0;
  for (int point = 0; point < 5; ++point) {
    const int d = 6;
    const double gamma = 1.5;
    const Vec x = normal_vec(d, 0.5, rng);
    const Vec y = normal_vec(d, 0.5, rng);
    const double exact = rbf_bundle(x, y, gamma).laplacian;
    const KernelValueFn value = rbf_black_box(gamma).value;
    double sum = 0.0, sum_sq = 0.0;
    constexpr int runs = 50;
    for (int r = 0; r < runs; ++r) {
      const double est = hutchinson_laplacian(value, x, y, 1e-3, 25, rng);
      sum += est;
      sum_sq += est * est;
    }
    const double mean = sum / runs;
    const double se = std::sqrt((sum_sq - sum * sum / runs) / (runs - 1) / runs);
    worst_z = std::max(worst_z, std::abs(mean - exact) / se);
  }
  suite.at_most("kernels.hutchinson_unbiased", worst_z, 4.0,
                "worst |run mean - exact| in standard errors, 50 runs x 25 probes");

  const double ratio = fd_hvp_richardson_ratio(8, 1e-3, derive_seed(0x72696368, {1}));
  suite.within("kernels.fd_hvp_second_order", ratio, 3.5, 4.5,
               describe("error(2 eps) / error(eps)", ratio));
}

// ---- targets --------------------------------------------------------------

void target_checks(Suite& suite) {
  Rng rng = suite.rng(2);
  const GaussianMixture ring = ring_mixture(5, 5.0, 1.0);
  const VPSchedule schedule;

  double resp_err = 0.0;
  bool resp_nonneg = true;
  for (int k = 0; k < 200; ++k) {
    const Vec x = normal_vec(2, 6.0, rng);
    const Vec r = ring.responsibilities(x);
    resp_err = std::max(resp_err, std::abs(r.sum() - 1.0));
    resp_nonneg = resp_nonneg && (r.array() >= 0.0).all();
  }
  suite.at_most("targets.responsibilities_sum", resp_nonneg ? resp_err : 1.0, 1e-12);

  double semigroup_err = 0.0;
  for (double t_from : {0.3, 0.6, 0.9, 1.0}) {
    for (double t_to : {0.0, 0.2, 0.25}) {
      const GaussianMixture direct = noised_mixture(ring, schedule, t_to);
      const GaussianMixture composed =
          renoise_mixture(noised_mixture(ring, schedule, t_from), schedule, t_from, t_to);
      semigroup_err = std::max(semigroup_err,
                               (direct.centers() - composed.centers()).cwiseAbs().maxCoeff());
      semigroup_err = std::max(semigroup_err, std::abs(direct.variance() - composed.variance()));
    }
  }
  suite.at_most("targets.noising_semigroup", semigroup_err, 1e-10,
                "max abs difference of means and variances");

  double score_err = 0.0;
  for (double t : {0.1, 0.5, 0.9}) {
    const GaussianMixture p = noised_mixture(ring, schedule, t);
    for (int k = 0; k < 20; ++k) {
      const Vec x = normal_vec(2, 3.0, rng);
      Vec fd(2);
      for (int a = 0; a < 2; ++a) {
        Vec up = x, down = x;
        up[a] += 1e-5;
        down[a] -= 1e-5;
        fd[a] = (p.log_density(up) - p.log_density(down)) / 2e-5;
      }
      score_err = std::max(score_err, (fd - p.score(x)).norm() / std::max(1.0, fd.norm()));
    }
  }
  suite.at_most("targets.noised_score_fd", score_err, 1e-6, "t in {0.1, 0.5, 0.9}");

  double vp_err = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0;
    vp_err = std::max(vp_err, std::abs(schedule.alpha(t) * schedule.alpha(t) +
                                       schedule.noise_variance(t) - 1.0));
  }
  suite.at_most("targets.variance_preserving", vp_err, 1e-14, "alpha^2 + noise variance - 1");
}

// ---- dynamics -------------------------------------------------------------

struct OuErrors {
  double mean = 0.0;
  double variance = 0.0;
};

// dx = -x dt + dW from x = 1 to t = 1, integrated with `steps` steps.
OuErrors ou_errors(int steps, int particles, std::uint64_t seed) {
  DriftField field;
  field.drift = [](const Vec& x, double) -> Vec { return -x; };
  field.volatility = [](double) { return 1.0; };
  ParticleBatch batch;
  batch.positions.assign(static_cast<std::size_t>(particles), Vec::Ones(1));
  Rng rng(seed);
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) batch = euler_maruyama_step(batch, field, {}, dt, rng);
  double sum = 0.0, sum_sq = 0.0;
  for (const Vec& x : batch.positions) {
    sum += x[0];
    sum_sq += x[0] * x[0];
  }
  const double mean = sum / particles;
  const double var = (sum_sq - sum * mean) / (particles - 1);
  return {std::abs(mean - std::exp(-1.0)), std::abs(var - 0.5 * (1.0 - std::exp(-2.0)))};
}

void dynamics_checks(Suite& suite) {
  Rng rng = suite.rng(3);
  const GaussianMixture ring = ring_mixture(5, 5.0, 1.0);
  const DriftField ot = otfm_drift(ring);
  double tweedie_err = 0.0;
  for (double t : {0.1, 0.5, 0.9}) {
    const GaussianMixture marginal = otfm_marginal(ring, t);
    for (int k = 0; k < 20; ++k) {
      const Vec x = normal_vec(2, 1.0 + 4.0 * t, rng);
      const Vec score = score_from_velocity(ot.drift(x, t), x, t);
      tweedie_err = std::max(tweedie_err, rel_err(score, marginal.score(x)));
    }
  }
  suite.at_most("dynamics.tweedie_roundtrip", tweedie_err, 1e-5, "t in {0.1, 0.5, 0.9}");

  const OuErrors coarse = ou_errors(10, 200000, derive_seed(0x6f75, {10}));
  const OuErrors fine = ou_errors(20, 200000, derive_seed(0x6f75, {20}));
  const double worst = std::max({coarse.mean / 0.1, coarse.variance / 0.1,
                                 fine.mean / 0.05, fine.variance / 0.05});
  std::ostringstream detail;
  detail << "mean error " << format_double(coarse.mean) << " -> " << format_double(fine.mean)
         << ", variance error " << format_double(coarse.variance) << " -> "
         << format_double(fine.variance) << " for dt 0.1 -> 0.05; value is max error / dt";
  suite.at_most("dynamics.integrator_weak_accuracy", worst, 1.0, detail.str());

  RunConfig config;
  config.method = Method::eddy;
  config.guidance.weight = 1.75;
  config.steps = 20;
  config.seed = 11;
  Rng a(99), b(99);
  const ParticleBatch first = sample_batch(config, ring, a);
  const ParticleBatch second = sample_batch(config, ring, b);
  bool same = first.positions.size() == second.positions.size();
  for (std::size_t i = 0; same && i < first.positions.size(); ++i) {
    same = std::memcmp(first.positions[i].data(), second.positions[i].data(),
                       sizeof(double) * static_cast<std::size_t>(first.positions[i].size())) == 0;
  }
  suite.holds("dynamics.determinism", same, "bitwise comparison of two seeded runs");
}

// ---- guidance -------------------------------------------------------------

Eigen::MatrixXd pair_matrix(const Vec& r, const Vec& v) {
  return v * r.transpose() - r * v.transpose();
}

// Central-difference divergence of a vector field at x.
double fd_divergence(const std::function<Vec(const Vec&)>& field, const Vec& x, double h) {
  double div = 0.0;
  Vec shifted = x;
  for (Eigen::Index b = 0; b < x.size(); ++b) {
    shifted[b] = x[b] + h;
    const double up = field(shifted)[b];
    shifted[b] = x[b] - h;
    const double down = field(shifted)[b];
    shifted[b] = x[b];
    div += (up - down) / (2.0 * h);
  }
  return div;
}

void guidance_checks(Suite& suite, const VerifyOptions& options) {
  Rng rng = suite.rng(4);

  double antisym = 0.0;
  double quad = 0.0;
  for (int d : {2, 5, 16}) {
    for (int k = 0; k < 20; ++k) {
      const Vec r = normal_vec(d, 1.0, rng);
      const Vec v = normal_vec(d, 1.0, rng);
      const Vec s = normal_vec(d, 1.0, rng);
      const Eigen::MatrixXd a = pair_matrix(r, v);
      antisym = std::max(antisym, (a + a.transpose()).cwiseAbs().maxCoeff());
      const Vec as = antisym_apply(r, v, s);
      antisym = std::max(antisym, rel_err(as, a * s));
      quad = std::max(quad, std::abs(s.dot(as)) / (s.norm() * as.norm() + 1e-300));
    }
  }
  suite.at_most("guidance.antisymmetry", std::max(antisym, quad), 1e-12,
                "A + A^T, A s against the dense matrix, <s, A s>");

  // Each column of K(., y) is a divergence-free field of x, and the row-wise
  // divergence of the pair matrix equals K v.
  double div_free = 0.0;
  double pair_div = 0.0;
  const double gamma = 1.0;
  const Vec y = Vec::Zero(2);
  const Vec v = (Vec(2) << 0.7, -1.3).finished();
  for (int ix = -4; ix <= 4; ++ix) {
    for (int iy = -4; iy <= 4; ++iy) {
      const Vec x = (Vec(2) << 0.31 * ix + 0.013, 0.29 * iy - 0.007).finished();
      const auto column = [&](const Vec& z) { return options.divfree(rbf_bundle(z, y, gamma), v); };
      const double scale = column(x).norm() + 1e-3 * v.norm();
      div_free = std::max(div_free, std::abs(fd_divergence(column, x, 1e-4)) / scale);

      Vec div_a = Vec::Zero(2);
      for (int b = 0; b < 2; ++b) {
        Vec up = x, down = x;
        up[b] += 1e-4;
        down[b] -= 1e-4;
        div_a += (pair_matrix(-rbf_bundle(up, y, gamma).gradient, v).col(b) -
                  pair_matrix(-rbf_bundle(down, y, gamma).gradient, v).col(b)) / 2e-4;
      }
      const Vec kv = options.divfree(rbf_bundle(x, y, gamma), v);
      pair_div = std::max(pair_div, (div_a - kv).norm() / scale);
    }
  }
  suite.at_most("guidance.divergence_free", div_free, 1e-6,
                "central-difference divergence of K(x, y) v over field scale");
  suite.at_most("guidance.pair_divergence", pair_div, 1e-6,
                "row-wise divergence of the pair matrix equals K v");

  for (double t : {0.25, 0.5, 0.75}) {
    const std::string tag = "t = " + format_double(t);
    const SteinSymmetryProbe nested = stein_symmetry_probe(t, SteinRoute::nested_differences, options.divfree);
    suite.at_most("guidance.stein_symmetry@" + format_double(t), nested.ratio(), 1e-4,
                  tag + ", nested differences of the pair matrix");
    const SteinSymmetryProbe closed = stein_symmetry_probe(t, SteinRoute::closed_form, options.divfree);
    suite.at_most("guidance.stein_symmetry_closed_form@" + format_double(t), closed.ratio(), 1e-4,
                  tag + ", A s + K v");
  }

  double equiv = 0.0;
  for (int d : {2, 8, 64}) {
    for (int rep = 0; rep < 5; ++rep) {
      const int n = 4;
      const double g = 0.8 + 0.4 * rep;
      std::vector<Vec> x, s, nv;
      for (int i = 0; i < n; ++i) {
        x.push_back(normal_vec(d, std::sqrt(g / d), rng));
        s.push_back(normal_vec(d, 1.0, rng));
        nv.push_back(normal_vec(d, 1.0, rng));
      }
      const std::vector<Vec> psi = eddy_rbf_guidance(x, s, nv, g);
      for (int i = 0; i < n; ++i) {
        Vec sum = Vec::Zero(d);
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const RbfBundle b = rbf_bundle(x[i], x[j], g);
          sum += antisym_apply(-b.gradient, nv[j], s[i]) + options.divfree(b, nv[j]);
        }
        sum /= static_cast<double>(n - 1);
        equiv = std::max(equiv, rel_err(psi[i], sum));
      }
    }
  }
  suite.at_most("guidance.closed_form_equivalence", equiv, 1e-12,
                "eddy_rbf_guidance against the pairwise A s + K v sum");

  for (int d : {8, 64}) {
    const double err = estimator_relative_error(3, d, 1e-3, 2000, 5, derive_seed(0xe57, {static_cast<std::uint64_t>(d)}));
    suite.at_most("guidance.estimator_fidelity@d" + std::to_string(d), err, 0.01,
                  "finite-difference/Hutchinson field vs closed form, eps 1e-3, 2000 probes");
  }

  const ScalingReport scaling = run_scaling(kScalingDims, kScalingGammas, 1.0, 64, 0xc0ffee);
  double worst_step = 0.0;
  double lo = 1.0, hi = 0.0;
  for (std::size_t k = 1; k < scaling.samples.size(); ++k) {
    const ScalingSample& prev = scaling.samples[k - 1];
    const ScalingSample& cur = scaling.samples[k];
    if (prev.gamma != cur.gamma) continue;
    const double step = cur.ratio_mean / prev.ratio_mean;
    lo = std::min(lo, step);
    hi = std::max(hi, step);
  }
  worst_step = (lo >= 0.35 && hi <= 0.7) ? 0.0 : 1.0;
  std::ostringstream detail;
  detail << "ratio falls by " << format_double(lo) << " .. " << format_double(hi)
         << " per 4x dimension";
  for (const ScalingFit& f : scaling.fits) {
    detail << "; slope at gamma " << format_double(f.gamma) << " = " << format_double(f.slope);
  }
  suite.holds("guidance.high_dim_dominance", worst_step == 0.0, detail.str());

  const std::vector<Vec> pair{(Vec(2) << 1.0, 0.0).finished(), (Vec(2) << 0.0, 0.0).finished()};
  const std::vector<Vec> pg = pg_guidance(pair, 1.0);
  suite.holds("guidance.pg_repels", pg[0][0] > 0.0 && pg[1][0] < 0.0 && (pg[0] + pg[1]).norm() < 1e-15,
              "two particles are pushed apart symmetrically");
}

// ---- sampler --------------------------------------------------------------

void sampler_checks(Suite& suite, const VerifyOptions& options) {
  const GaussianMixture ring = ring_mixture(5, 5.0, 1.0);

  {
    RunConfig config;
    config.method = Method::eddy;
    config.dynamics = DynamicsMode::ot_fm;
    config.guidance.weight = 1.75;
    config.steps = 50;
    Rng rng = suite.rng(5);
    ParticleBatch start;
    for (int i = 0; i < config.particles; ++i) start.positions.push_back(normal_vec(2, 1.0, rng));
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    ParticleBatch permuted = start;
    for (std::size_t i = 0; i < perm.size(); ++i) permuted.positions[i] = start.positions[perm[i]];
    Rng r1(1), r2(1);
    const ParticleBatch out = integrate(config, ring, start, r1);
    const ParticleBatch out_perm = integrate(config, ring, permuted, r2);
    double err = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      err = std::max(err, (out_perm.positions[i] - out.positions[perm[i]]).norm());
    }
    suite.at_most("sampler.permutation_equivariance", err, 1e-10,
                  "deterministic flow, max displacement between permuted runs");
  }

  {
    RunConfig config;
    config.method = Method::eddy;
    config.guidance.weight = 3.0;
    config.guidance.stop_ratio = 0.5;
    const DriftField field = make_field(config, ring);
    Rng rng = suite.rng(6);
    ParticleBatch batch;
    for (int i = 0; i < config.particles; ++i) batch.positions.push_back(normal_vec(2, 1.5, rng));
    auto particle0_after = [&](std::uint64_t step, const Vec& neighbour) {
      ParticleBatch b = batch;
      b.step = step;
      b.time = static_cast<double>(step) / config.steps;
      b.positions[1] = neighbour;
      Rng noise(77);
      return guided_step(config, field, b, noise).positions[0];
    };
    const Vec moved = batch.positions[1] + Vec::Constant(2, 0.3);
    const Vec late_a = particle0_after(60, batch.positions[1]);
    const Vec late_b = particle0_after(60, moved);
    const Vec early_a = particle0_after(10, batch.positions[1]);
    const Vec early_b = particle0_after(10, moved);
    const bool gated = std::memcmp(late_a.data(), late_b.data(), 2 * sizeof(double)) == 0;
    const bool active = (early_a - early_b).norm() > 0.0;
    suite.holds("sampler.gate_correctness", gated && active,
                "neighbour perturbation leaves particle 0 bitwise unchanged at t >= sr and moves it before");
  }

  {
    SweepConfig config;
    config.batches = 300;
    config.run.steps = 30;
    config.eddy_weights = {1.75};
    config.pg_weights = {};
    const ArmResult one = run_arm(config, Method::eddy, 1.75, 5, 1);
    const ArmResult three = run_arm(config, Method::eddy, 1.75, 5, 3);
    bool same = true;
    for (std::size_t b = 0; same && b < one.batches.size(); ++b) {
      for (std::size_t i = 0; same && i < one.batches[b].positions.size(); ++i) {
        same = one.batches[b].positions[i] == three.batches[b].positions[i];
      }
    }
    suite.holds("sampler.thread_invariance", same, "1 vs 3 worker threads, bitwise");
  }

  if (!options.quick) {
    SweepConfig config;
    config.seed = derive_seed(options.seed, {7});
    config.eddy_weights = {0.5, 1.75, 3.0};
    config.pg_weights = {};
    const SweepResult result = run_gmm_sweep(config, 1);
    double min_p = 1.0;
    for (const MarginalTest& t : result.tests) min_p = std::min(min_p, t.result.p_value);
    const double alpha = 0.05 / static_cast<double>(result.tests.size());
    suite.holds("sampler.marginal_preservation", min_p > alpha,
                "smallest p over " + std::to_string(result.tests.size()) + " tests = " +
                    format_double(min_p) + ", Bonferroni level " + format_double(alpha));
  }
}

// ---- stats ----------------------------------------------------------------

void stats_checks(Suite& suite) {
  Rng rng = suite.rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](int n, double shift, double scale) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = shift + scale * normal(rng);
    return v;
  };

  double swap_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> a = draw(50 + k, 0.0, 1.0);
    const std::vector<double> b = draw(70, 0.2, 1.5);
    swap_err = std::max(swap_err, std::abs(ks_two_sample(a, b).p_value - ks_two_sample(b, a).p_value));
    swap_err = std::max(swap_err, std::abs(mann_whitney(a, b).p_value - mann_whitney(b, a).p_value));
    swap_err = std::max(swap_err, std::abs(welch_t(a, b).p_value - welch_t(b, a).p_value));
    swap_err = std::max(swap_err, std::abs(mann_whitney(a, b).statistic + mann_whitney(b, a).statistic - 1.0));
    swap_err = std::max(swap_err, std::abs(welch_t(a, b).statistic + welch_t(b, a).statistic));
  }
  suite.at_most("stats.swap_symmetry", swap_err, 1e-10, "p-values and oriented statistics under a <-> b");

  const std::vector<double> a = draw(200, 0.0, 1.0);
  bool monotone = true;
  double previous = 2.0;
  for (int k = 0; k <= 20; ++k) {
    std::vector<double> b = a;
    for (double& x : b) x += 0.05 * k;
    const double p = ks_two_sample(a, b).p_value;
    monotone = monotone && p <= previous;
    previous = p;
  }
  suite.holds("stats.ks_monotone", monotone, "KS p-value nonincreasing as a shifted copy of a moves away");

  constexpr int reps = 1000;
  int rejections[3] = {0, 0, 0};
  for (int r = 0; r < reps; ++r) {
    const std::vector<double> x = draw(100, 0.0, 1.0);
    const std::vector<double> y = draw(100, 0.0, 1.0);
    rejections[0] += ks_two_sample(x, y).p_value < 0.05;
    rejections[1] += mann_whitney(x, y).p_value < 0.05;
    rejections[2] += welch_t(x, y).p_value < 0.05;
  }
  const char* names[] = {"ks", "mann_whitney", "welch"};
  for (int k = 0; k < 3; ++k) {
    const double rate = static_cast<double>(rejections[k]) / reps;
    suite.within(std::string("stats.null_calibration@") + names[k], rate, 0.03, 0.08,
                 "rejection rate at 0.05 over 1000 null pairs of 100 vs 100");
  }

  suite.at_most("stats.iid_coverage_formula",
                std::abs(expected_iid_coverage(5, 5) - 3.3616), 1e-12, "5 modes, 5 particles");
}

}  // namespace

SteinSymmetryProbe stein_symmetry_probe(double t, SteinRoute route, const DivFreeFn& divfree,
                                        double step) {
  const GaussianMixture ring = ring_mixture(5, 5.0, 1.0);
  const VPSchedule schedule;
  const GaussianMixture p = noised_mixture(ring, schedule, t);
  const DriftField field = vp_reverse_drift(ring, schedule);
  const double gamma = 1.0;

  const double spread = 5.0 * schedule.alpha(t);
  std::vector<Vec> neighbours{
      (Vec(2) << 0.4, -0.3).finished(),
      0.6 * p.centers().row(0).transpose(),
      (Vec(2) << -0.5 * spread, 0.25 * spread).finished(),
  };
  std::vector<Vec> vectors;
  for (const Vec& y : neighbours) vectors.push_back(field.drift(y, t));

  const auto density = [&](const Vec& x) { return std::exp(p.log_density(x)); };
  const auto score = [&](const Vec& x) { return p.score(x); };

  std::function<Vec(const Vec&)> stein_field;
  if (route == SteinRoute::nested_differences) {
    stein_field = [&](const Vec& x) {
      Vec total = Vec::Zero(2);
      for (std::size_t j = 0; j < neighbours.size(); ++j) {
        const Vec& y = neighbours[j];
        const Vec& v = vectors[j];
        const MatrixField a = [&](const Vec& z) {
          return pair_matrix(-rbf_bundle(z, y, gamma).gradient, v);
        };
        total += stein_apply_numeric(a, score, x, step);
      }
      return total;
    };
  } else {
    stein_field = [&](const Vec& x) {
      Vec total = Vec::Zero(2);
      const Vec s = p.score(x);
      for (std::size_t j = 0; j < neighbours.size(); ++j) {
        const RbfBundle b = rbf_bundle(x, neighbours[j], gamma);
        total += antisym_apply(-b.gradient, vectors[j], s) + divfree(b, vectors[j]);
      }
      return total;
    };
  }
  const auto weighted = [&](const std::function<Vec(const Vec&)>& f) {
    return [&density, f](const Vec& x) -> Vec { return density(x) * f(x); };
  };
  const std::function<Vec(const Vec&)> flux = weighted(stein_field);
  const std::function<Vec(const Vec&)> drift_flux =
      weighted([&](const Vec& x) { return field.drift(x, t); });

  SteinSymmetryProbe out;
  const double half = spread + 3.0 * std::sqrt(p.variance());
  constexpr int kGrid = 41;
  for (int ix = 0; ix < kGrid; ++ix) {
    for (int iy = 0; iy < kGrid; ++iy) {
      const Vec x = (Vec(2) << -half + 2.0 * half * ix / (kGrid - 1),
                     -half + 2.0 * half * iy / (kGrid - 1)).finished();
      out.residual = std::max(out.residual, std::abs(fd_divergence(flux, x, step)));
      out.drift_scale = std::max(out.drift_scale, std::abs(fd_divergence(drift_flux, x, step)));
    }
  }
  return out;
}

double estimator_relative_error(int n, int d, double epsilon, int probes, int instances,
                                std::uint64_t seed, double spread) {
  Rng rng(seed);
  const double gamma = 1.0;
  double worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    std::vector<Vec> x, s, v;
    for (int i = 0; i < n; ++i) {
      // E|x_i - x_j|^2 = spread * gamma
      x.push_back(normal_vec(d, std::sqrt(spread * gamma / (2.0 * d)), rng));
      s.push_back(normal_vec(d, 1.0, rng));
      v.push_back(normal_vec(d, 1.0, rng));
    }
    const std::vector<Vec> exact = eddy_rbf_guidance(x, s, v, gamma);
    const std::vector<Vec> approx =
        eddy_approx_guidance(x, s, v, rbf_black_box(gamma), epsilon, probes, rng);
    for (int i = 0; i < n; ++i) worst = std::max(worst, rel_err(approx[i], exact[i]));
  }
  return worst;
}

double fd_hvp_richardson_ratio(int d, double epsilon, std::uint64_t seed) {
  Rng rng(seed);
  const double gamma = 1.0;
  const Vec x = normal_vec(d, 0.4, rng);
  const Vec y = normal_vec(d, 0.4, rng);
  const Vec v = normal_vec(d, 1.0, rng);
  const BlackBoxKernel k = rbf_black_box(gamma);
  const Vec exact = rbf_bundle(x, y, gamma).hessian_apply(v);
  const double coarse = (fd_hvp(k, x, y, v, 2.0 * epsilon) - exact).norm();
  const double fine = (fd_hvp(k, x, y, v, epsilon) - exact).norm();
  return coarse / fine;
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  Suite suite(options.seed);
  kernel_checks(suite);
  target_checks(suite);
  dynamics_checks(suite);
  guidance_checks(suite, options);
  sampler_checks(suite, options);
  stats_checks(suite);
  return suite.take();
}

nlohmann::json verify_report(const std::vector<CheckResult>& checks) {
  json list = json::array();
  bool all = true;
  for (const CheckResult& c : checks) {
    all = all && c.passed;
    list.push_back({{"id", c.id},
                    {"passed", c.passed},
                    {"value", c.value},
                    {"threshold", c.threshold},
                    {"detail", c.detail}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"artifact_version", std::string(kArtifactVersion)},
          {"passed", all},
          {"checks", list}};
}

}  // namespace eddy
