#include "eddy/sampler.hpp"
#include "eddy/stats.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using eddy::Method;
using eddy::ParticleBatch;
using eddy::Rng;
using eddy::RunConfig;
using eddy::Vec;

namespace {

const eddy::GaussianMixture& ring() {
  static const eddy::GaussianMixture r = eddy::ring_mixture(5, 5.0, 1.0);
  return r;
}

RunConfig config_for(Method m, double weight) {
  RunConfig c;
  c.method = m;
  c.guidance.weight = weight;
  c.steps = 40;
  return c;
}

bool same_batches(const std::vector<ParticleBatch>& a, const std::vector<ParticleBatch>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].positions.size() != b[i].positions.size()) return false;
    for (std::size_t p = 0; p < a[i].positions.size(); ++p) {
      if (a[i].positions[p] != b[i].positions[p]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("to_string") {
  CHECK(eddy::to_string(Method::iid) == "iid");
  CHECK(eddy::to_string(Method::eddy) == "eddy");
  CHECK(eddy::to_string(Method::pg) == "pg");
  CHECK(eddy::to_string(eddy::DynamicsMode::vp_ddpm) == "vp_ddpm");
  CHECK(eddy::to_string(eddy::DynamicsMode::ot_fm) == "ot_fm");
}

TEST_CASE("RunConfig::validate") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.particles = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.particles = 1;
  CHECK_NOTHROW(c.validate());
  c.method = Method::eddy;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.guidance.gamma = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("batch_seed") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(eddy::batch_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(eddy::batch_seed(42, 7) == eddy::batch_seed(42, 7));
  CHECK(eddy::batch_seed(42, 7) != eddy::batch_seed(43, 7));
}

TEST_CASE("sample_batch shape and time bookkeeping") {
  const RunConfig c = config_for(Method::eddy, 1.0);
  Rng rng(1);
  const ParticleBatch b = eddy::sample_batch(c, ring(), rng);
  CHECK(b.size() == 5);
  CHECK(b.dim() == 2);
  CHECK(b.time == 1.0);
  CHECK(b.step == 40);
  Rng again(1);
  CHECK_THROWS_AS(eddy::guided_step(c, eddy::make_field(c, ring()), b, again), std::invalid_argument);

  ParticleBatch wrong;
  wrong.positions = std::vector<Vec>(4, Vec::Zero(2));
  CHECK_THROWS_AS(eddy::integrate(c, ring(), wrong, rng), std::invalid_argument);
  wrong.positions = std::vector<Vec>(5, Vec::Zero(3));
  CHECK_THROWS_AS(eddy::integrate(c, ring(), wrong, rng), std::invalid_argument);
}

TEST_CASE("zero weight and a closed gate reproduce the iid sampler bit for bit") {
  const auto iid = eddy::sample_many(config_for(Method::iid, 0.0), ring(), 20, 9);
  CHECK(same_batches(iid, eddy::sample_many(config_for(Method::eddy, 0.0), ring(), 20, 9)));
  CHECK(same_batches(iid, eddy::sample_many(config_for(Method::pg, 0.0), ring(), 20, 9)));
  RunConfig gated = config_for(Method::eddy, 3.0);
  gated.guidance.stop_ratio = 0.0;
  CHECK(same_batches(iid, eddy::sample_many(gated, ring(), 20, 9)));
  CHECK_FALSE(same_batches(iid, eddy::sample_many(config_for(Method::eddy, 1.0), ring(), 20, 9)));
}

TEST_CASE("guidance stops at the stop ratio") {
  RunConfig a = config_for(Method::eddy, 2.0);
  a.guidance.stop_ratio = 0.5;
  RunConfig b = a;
  b.guidance.weight = 0.0;
  const eddy::DriftField field = eddy::make_field(a, ring());
  ParticleBatch batch;
  batch.positions = {Vec::Zero(2), Vec::Ones(2), -Vec::Ones(2), Vec::Unit(2, 0), Vec::Unit(2, 1)};
  for (std::uint64_t step : {0, 10, 19, 20, 21, 39}) {
    batch.step = step;
    Rng ra(2), rb(2);
    const ParticleBatch pa = eddy::guided_step(a, field, batch, ra);
    const ParticleBatch pb = eddy::guided_step(b, field, batch, rb);
    const bool equal = pa.positions[0] == pb.positions[0];
    CHECK(equal == (step >= 20));
  }
}

TEST_CASE("sample_many is thread invariant") {
  for (Method m : {Method::iid, Method::eddy, Method::pg}) {
    RunConfig c = config_for(m, 1.5);
    const auto one = eddy::sample_many(c, ring(), 12, 77, 1);
    CHECK(same_batches(one, eddy::sample_many(c, ring(), 12, 77, 3)));
    CHECK(same_batches(one, eddy::sample_many(c, ring(), 12, 77, 64)));
  }
  RunConfig approx = config_for(Method::eddy, 1.0);
  approx.guidance.estimator = eddy::ApproximateEstimator{1e-3, 3};
  CHECK(same_batches(eddy::sample_many(approx, ring(), 6, 5, 1), eddy::sample_many(approx, ring(), 6, 5, 2)));
  CHECK_THROWS_AS(eddy::sample_many(approx, ring(), 0, 5, 1), std::invalid_argument);
}

TEST_CASE("OT flow matching step is permutation equivariant") {
  RunConfig c = config_for(Method::eddy, 1.0);
  c.dynamics = eddy::DynamicsMode::ot_fm;
  const eddy::DriftField field = eddy::make_field(c, ring());
  Rng rng(3);
  ParticleBatch b;
  for (int i = 0; i < 5; ++i) b.positions.push_back(oracle::randn(2, 1.0, rng));
  b.step = 10;
  ParticleBatch p = b;
  const std::vector<std::size_t> perm{4, 2, 0, 1, 3};
  for (std::size_t i = 0; i < 5; ++i) p.positions[i] = b.positions[perm[i]];
  const ParticleBatch nb = eddy::guided_step(c, field, b, rng);
  const ParticleBatch np = eddy::guided_step(c, field, p, rng);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((np.positions[i] - nb.positions[perm[i]]).norm() < 1e-13);
  }
}

TEST_CASE("iid VP sampling recovers a Gaussian target") {
  const eddy::GaussianMixture g((Vec(2) << 2.0, -1.0).finished().transpose(), Vec::Ones(1), 0.5);
  RunConfig c;
  c.steps = 400;
  c.particles = 4;
  const auto batches = eddy::sample_many(c, g, 500, 11);
  Vec mean = Vec::Zero(2);
  double sq = 0;
  for (const auto& b : batches) {
    for (const Vec& x : b.positions) mean += x;
  }
  mean /= 2000.0;
  for (const auto& b : batches) {
    for (const Vec& x : b.positions) sq += (x - mean).squaredNorm();
  }
  const double var = sq / (2 * 1999.0);
  CHECK(std::abs(mean[0] - 2.0) < 0.08);
  CHECK(std::abs(mean[1] + 1.0) < 0.08);
  CHECK(var == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("iid VP sampling matches the ring marginal at 10^4 particles") {
  RunConfig c;
  const auto batches = eddy::sample_many(c, ring(), 2000, 12);
  Rng rng(13);
  const Eigen::MatrixXd ref = ring().sample(10000, rng);
  std::vector<double> a, b;
  for (const auto& batch : batches) {
    for (const Vec& x : batch.positions) a.push_back(x.norm());
  }
  for (Eigen::Index i = 0; i < ref.rows(); ++i) b.push_back(ref.row(i).norm());
  CHECK(eddy::ks_two_sample(a, b).p_value > 0.05);
  std::vector<double> ax, bx;
  for (const auto& batch : batches) {
    for (const Vec& x : batch.positions) ax.push_back(x[0]);
  }
  for (Eigen::Index i = 0; i < ref.rows(); ++i) bx.push_back(ref(i, 0));
  CHECK(eddy::ks_two_sample(ax, bx).p_value > 0.05);
}

TEST_CASE("sample_many determinism and pooled single-particle marginals") {
  RunConfig c;
  const auto a = eddy::sample_many(c, ring(), 600, 21);
  CHECK(same_batches(a, eddy::sample_many(c, ring(), 600, 21)));

  // One particle per batch is i.i.d. across batches.
  Rng rng(22);
  const Eigen::MatrixXd ref = ring().sample(600, rng);
  std::vector<double> dist, angle, ref_dist, ref_angle;
  for (const auto& b : a) {
    const auto s = eddy::nearest_mode_stats(b.positions[0], ring().centers());
    dist.push_back(s.distance);
    angle.push_back(s.angle);
  }
  for (Eigen::Index i = 0; i < ref.rows(); ++i) {
    const auto s = eddy::nearest_mode_stats(ref.row(i).transpose(), ring().centers());
    ref_dist.push_back(s.distance);
    ref_angle.push_back(s.angle);
  }
  for (const auto& [x, y] : {std::pair{&dist, &ref_dist}, std::pair{&angle, &ref_angle}}) {
    CHECK(eddy::ks_two_sample(*x, *y).p_value > 0.05);
    CHECK(eddy::mann_whitney(*x, *y).p_value > 0.05);
    CHECK(eddy::welch_t(*x, *y).p_value > 0.05);
  }
}
