#include "eddy/stats.hpp"
#include "eddy/targets.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

using eddy::GaussianMixture;
using eddy::Rng;
using eddy::Vec;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

GaussianMixture single(const Vec& center, double var) {
  return GaussianMixture(center.transpose(), Vec::Ones(1), var);
}

}  // namespace

TEST_CASE("ring_mixture centers") {
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  CHECK(ring.dim() == 2);
  CHECK(ring.components() == 5);
  CHECK(std::abs(ring.centers()(0, 0)) < 1e-15);
  CHECK(ring.centers()(0, 1) == 5.0);
  CHECK((ring.weights().array() == 0.2).all());
  for (int l = 0; l < 5; ++l) {
    CHECK(ring.centers().row(l).norm() == doctest::Approx(5.0));
  }

  const GaussianMixture one = eddy::ring_mixture(1, 0.0, 1.0);
  CHECK(one.centers().norm() == 0.0);
  CHECK(one.log_density(Vec::Zero(2)) == doctest::Approx(-std::log(2 * std::numbers::pi)));

  const GaussianMixture four = eddy::ring_mixture(4, 1.0, 0.5);
  const double expected[4][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}};
  for (int l = 0; l < 4; ++l) {
    CHECK(four.centers()(l, 0) == doctest::Approx(expected[l][0]).epsilon(1e-15));
    CHECK(four.centers()(l, 1) == doctest::Approx(expected[l][1]).epsilon(1e-15));
  }
}

TEST_CASE("GaussianMixture validation") {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(GaussianMixture(c, vec2(0.5, 0.6), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(c, vec2(1.5, -0.5), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(c, vec2(0.5, 0.5), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(c, Vec::Ones(3) / 3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(Eigen::MatrixXd(0, 2), Vec(0), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(eddy::ring_mixture(0, 1.0, 1.0), std::invalid_argument);
  const GaussianMixture ok(c, vec2(0.5, 0.5), 1.0);
  CHECK_THROWS_AS(ok.log_density(Vec::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(ok.score(Vec::Zero(1)), std::invalid_argument);
}

TEST_CASE("log_density examples") {
  const GaussianMixture g = single(Vec::Constant(3, 0.7), 2.0);
  CHECK(g.log_density(Vec::Constant(3, 0.7)) == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi * 2.0)));

  Eigen::MatrixXd c(2, 2);
  c << -1, 0, 1, 0;
  const GaussianMixture two(c, vec2(0.5, 0.5), 0.8);
  const Vec mid = vec2(0, 0.4);
  const double one_component = std::log(0.5) - std::log(2 * std::numbers::pi * 0.8) - (1 + 0.16) / 1.6;
  CHECK(two.log_density(mid) == doctest::Approx(std::log(2.0) + one_component));

  // direct summation values
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  CHECK(ring.log_density(vec2(0, 0)) == doctest::Approx(-14.337877066409346).epsilon(1e-13));
  CHECK(ring.log_density(vec2(1.3, -0.4)) == doctest::Approx(-10.675471182510597).epsilon(1e-13));

  // far from all centers log-sum-exp stays finite where direct summation underflows
  CHECK(std::isfinite(ring.log_density(vec2(80, 80))));
}

TEST_CASE("score examples") {
  const GaussianMixture g = single(vec2(1, -2), 0.5);
  const Vec x = vec2(0.3, 0.1);
  CHECK((g.score(x) - (vec2(1, -2) - x) / 0.5).norm() < 1e-14);

  // On the symmetry axis through center 0 the tangential component vanishes.
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  const Vec at_center = ring.centers().row(0).transpose();
  const Vec s = ring.score(at_center);
  CHECK(std::isfinite(s.norm()));
  CHECK(std::abs(s[0]) < 1e-12);
  CHECK(std::abs(ring.score(vec2(0, -2.0))[0]) < 1e-12);

  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const Vec y = oracle::randn(2, 4.0, rng);
    Vec fd(2);
    for (int a = 0; a < 2; ++a) {
      Vec up = y, down = y;
      up[a] += 1e-5;
      down[a] -= 1e-5;
      fd[a] = (std::log(oracle::mixture_density(ring.centers(), ring.weights(), 1.0, up)) -
               std::log(oracle::mixture_density(ring.centers(), ring.weights(), 1.0, down))) / 2e-5;
    }
    CHECK((ring.score(y) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("responsibilities sum to one") {
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 0.3);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const Vec r = ring.responsibilities(oracle::randn(2, 10.0, rng));
    CHECK(std::abs(r.sum() - 1.0) <= 1e-12);
    CHECK((r.array() >= 0.0).all());
  }
}

TEST_CASE("VPSchedule") {
  const eddy::VPSchedule s;
  CHECK(s.alpha(1.0) == 1.0);
  CHECK(s.alpha(0.0) == doctest::Approx(0.0065715864949296189).epsilon(1e-13));
  CHECK(s.alpha(0.25) == doctest::Approx(0.058663503011880822).epsilon(1e-13));
  CHECK(s.alpha(0.5) == doctest::Approx(0.28118288079675241).epsilon(1e-13));
  CHECK(s.alpha(0.75) == doctest::Approx(0.72365718508308641).epsilon(1e-13));
  double prev = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = k / 100.0;
    CHECK(s.alpha(t) >= prev);
    CHECK(s.alpha(t) > 0.0);
    CHECK(s.alpha(t) <= 1.0);
    CHECK(std::abs(s.alpha(t) * s.alpha(t) + s.noise_variance(t) - 1.0) < 1e-14);
    prev = s.alpha(t);
  }
  CHECK(s.rate(1.0) == doctest::Approx(0.1));
  CHECK(s.rate(0.0) == doctest::Approx(20.0));
  CHECK_THROWS_AS(s.alpha(1.5), std::domain_error);
  CHECK_THROWS_AS(s.rate(-0.1), std::domain_error);
  CHECK_THROWS_AS(eddy::VPSchedule(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(eddy::VPSchedule(2.0, 1.0), std::invalid_argument);
}

TEST_CASE("noised_mixture boundaries") {
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  const eddy::VPSchedule s;
  const GaussianMixture at_one = eddy::noised_mixture(ring, s, 1.0);
  CHECK((at_one.centers() - ring.centers()).norm() == 0.0);
  CHECK(at_one.variance() == 1.0);

  // alpha(0) is exp(-B/2) with B = 10.05, so the prior end is N(0, I) up to
  // centers of norm 5 alpha(0).
  const GaussianMixture at_zero = eddy::noised_mixture(ring, s, 0.0);
  CHECK(at_zero.variance() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(at_zero.centers().rowwise().norm().maxCoeff() == doctest::Approx(5.0 * s.alpha(0.0)));
  CHECK(at_zero.centers().rowwise().norm().maxCoeff() < 0.035);

  const eddy::VPSchedule steep(0.1, 60.0);
  CHECK(eddy::noised_mixture(ring, steep, 0.0).centers().norm() < 1e-5);
  CHECK_THROWS_AS(eddy::noised_mixture(ring, s, -0.01), std::domain_error);
}

TEST_CASE("noised_mixture semigroup") {
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 0.6);
  const eddy::VPSchedule s(0.3, 15.0);
  for (double t : {0.4, 0.7, 1.0}) {
    for (double t2 : {0.0, 0.1, 0.35}) {
      const GaussianMixture direct = eddy::noised_mixture(ring, s, t2);
      const GaussianMixture composed =
          eddy::renoise_mixture(eddy::noised_mixture(ring, s, t), s, t, t2);
      CHECK((direct.centers() - composed.centers()).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(direct.variance() - composed.variance()) <= 1e-10);
    }
  }
  CHECK_THROWS_AS(eddy::renoise_mixture(ring, s, 0.3, 0.5), std::invalid_argument);
}

TEST_CASE("noised score matches finite differences") {
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  const eddy::VPSchedule s;
  Rng rng(3);
  for (double t : {0.1, 0.5, 0.9}) {
    const GaussianMixture p = eddy::noised_mixture(ring, s, t);
    for (int k = 0; k < 20; ++k) {
      const Vec x = oracle::randn(2, 3.0, rng);
      Vec fd(2);
      for (int a = 0; a < 2; ++a) {
        Vec up = x, down = x;
        up[a] += 1e-5;
        down[a] -= 1e-5;
        fd[a] = (p.log_density(up) - p.log_density(down)) / 2e-5;
      }
      CHECK((p.score(x) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("noised_mixture matches forward-noised target samples") {
  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  const eddy::VPSchedule s;
  const double t = 0.6;
  const double alpha = s.alpha(t);
  Rng rng(4);
  const Eigen::MatrixXd clean = ring.sample(10000, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> mc_x, mc_r;
  for (Eigen::Index i = 0; i < clean.rows(); ++i) {
    const Vec x = alpha * clean.row(i).transpose() +
                  std::sqrt(1 - alpha * alpha) * (Vec(2) << normal(rng), normal(rng)).finished();
    mc_x.push_back(x[0]);
    mc_r.push_back(x.norm());
  }
  const Eigen::MatrixXd analytic = eddy::noised_mixture(ring, s, t).sample(10000, rng);
  std::vector<double> an_x, an_r;
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    an_x.push_back(analytic(i, 0));
    an_r.push_back(analytic.row(i).norm());
  }
  CHECK(eddy::ks_two_sample(mc_x, an_x).p_value > 0.05);
  CHECK(eddy::ks_two_sample(mc_r, an_r).p_value > 0.05);
}

TEST_CASE("sample") {
  Rng rng(5);
  const GaussianMixture g = single(vec2(2, -1), 0.25);
  const Eigen::MatrixXd x = g.sample(100000, rng);
  const Vec mean = x.colwise().mean().transpose();
  CHECK(std::abs(mean[0] - 2) <= 4 * 0.5 / std::sqrt(1e5));
  CHECK(std::abs(mean[1] + 1) <= 4 * 0.5 / std::sqrt(1e5));

  Eigen::MatrixXd c(2, 2);
  c << -10, 0, 10, 0;
  const GaussianMixture degenerate(c, vec2(1, 0), 1.0);
  CHECK((degenerate.sample(1000, rng).col(0).array() < 0).all());

  const GaussianMixture ring = eddy::ring_mixture(5, 5.0, 1.0);
  const Eigen::MatrixXd r = ring.sample(20000, rng);
  std::vector<int> counts(5, 0);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    Eigen::Index best = 0;
    (ring.centers().rowwise() - r.row(i)).rowwise().squaredNorm().minCoeff(&best);
    counts[static_cast<std::size_t>(best)]++;
  }
  const double sd = std::sqrt(20000 * 0.2 * 0.8);
  for (int c5 : counts) CHECK(std::abs(c5 - 4000) <= 4 * sd);
}
