#include "eddy/guidance.hpp"

#include "eddy/seeding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace eddy {

namespace {

void check_particles(std::span<const Vec> positions, const char* who) {
  if (positions.size() < 2) {
    throw std::invalid_argument(std::string(who) + ": need at least two particles");
  }
  const Eigen::Index d = positions.front().size();
  for (const Vec& x : positions) {
    if (x.size() != d) {
      throw std::invalid_argument(std::string(who) + ": inconsistent particle dimensions");
    }
  }
}

void check_companion(std::span<const Vec> positions, std::span<const Vec> other,
                     const char* who, const char* what) {
  if (other.size() != positions.size()) {
    throw std::invalid_argument(std::string(who) + ": one " + what +
                                " per particle required");
  }
  for (const Vec& v : other) {
    if (v.size() != positions.front().size()) {
      throw std::invalid_argument(std::string(who) + ": " + what +
                                  " dimension mismatch");
    }
  }
}

}  // namespace

void GuidanceConfig::validate() const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("guidance weight must be nonnegative");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("guidance bandwidth must be positive");
  }
  if (!(stop_ratio >= 0.0 && stop_ratio <= 1.0)) {
    throw std::invalid_argument("stop ratio must lie in [0, 1]");
  }
  if (const auto* approx = std::get_if<ApproximateEstimator>(&estimator)) {
    if (!(approx->epsilon > 0.0)) {
      throw std::invalid_argument("finite-difference epsilon must be positive");
    }
    if (approx->probes < 1) {
      throw std::invalid_argument("Hutchinson probe count must be at least 1");
    }
  }
}

Vec antisym_apply(const Vec& r, const Vec& v, const Vec& s) {
  if (r.size() != v.size() || r.size() != s.size()) {
    throw std::invalid_argument("antisym_apply: dimension mismatch");
  }
  return r.dot(s) * v - v.dot(s) * r;
}

Vec divfree_apply(const RbfBundle& bundle, const Vec& v) {
  if (v.size() != bundle.dim()) {
    throw std::invalid_argument("divfree_apply: dimension mismatch");
  }
  const double c = 2.0 / bundle.gamma;
  const double d = static_cast<double>(bundle.dim());
  const double diag = d - 1.0 - c * bundle.delta.squaredNorm();
  return c * bundle.value * (diag * v + c * bundle.delta.dot(v) * bundle.delta);
}

std::vector<Vec> eddy_rbf_guidance(std::span<const Vec> positions,
                                   std::span<const Vec> scores,
                                   std::span<const Vec> neighbor_vectors,
                                   double gamma) {
  check_particles(positions, "eddy_rbf_guidance");
  check_companion(positions, scores, "eddy_rbf_guidance", "score");
  check_companion(positions, neighbor_vectors, "eddy_rbf_guidance", "neighbor vector");
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("eddy_rbf_guidance: bandwidth must be positive");
  }
  const std::size_t n = positions.size();
  const Eigen::Index dim = positions.front().size();
  const double d = static_cast<double>(dim);
  const double c = 2.0 / gamma;
  std::vector<Vec> psi(n, Vec::Zero(dim));
  Vec delta(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& s = scores[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      delta = positions[i] - positions[j];
      const double sq = delta.squaredNorm();
      const double k = std::exp(-sq / gamma);
      if (k < kNegligibleKernel) continue;
      const Vec& v = neighbor_vectors[j];
      const double coef_delta = c * delta.dot(v) - v.dot(s);
      const double coef_v = d - 1.0 - c * sq + delta.dot(s);
      psi[i] += k * (coef_delta * delta + coef_v * v);
    }
    psi[i] *= c / static_cast<double>(n - 1);
  }
  return psi;
}

std::vector<Vec> eddy_approx_guidance(std::span<const Vec> positions,
                                      std::span<const Vec> scores,
                                      std::span<const Vec> neighbor_vectors,
                                      const BlackBoxKernel& kernel,
                                      double epsilon, int probes, Rng& rng) {
  check_particles(positions, "eddy_approx_guidance");
  check_companion(positions, scores, "eddy_approx_guidance", "score");
  check_companion(positions, neighbor_vectors, "eddy_approx_guidance", "neighbor vector");
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("eddy_approx_guidance: epsilon must be positive");
  }
  if (probes < 1) {
    throw std::invalid_argument("eddy_approx_guidance: need at least one probe");
  }
  if (!kernel.value || !kernel.gradient) {
    throw std::invalid_argument("eddy_approx_guidance: kernel needs value and gradient");
  }
  const std::uint64_t key = rng();
  const std::size_t n = positions.size();
  const Eigen::Index dim = positions.front().size();
  std::vector<Vec> psi(n, Vec::Zero(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& x = positions[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec& y = positions[j];
      if (kernel.value(x, y) < kNegligibleKernel) continue;
      const Vec& v = neighbor_vectors[j];
      const Vec repulsive = -kernel.gradient(x, y);
      Rng pair_rng(derive_seed(key, {i, j}));
      const double lap =
          hutchinson_laplacian(kernel.value, x, y, epsilon, probes, pair_rng);
      const Vec hv = fd_hvp(kernel, x, y, v, epsilon);
      psi[i] += antisym_apply(repulsive, v, scores[i]) + (hv - lap * v);
    }
    psi[i] /= static_cast<double>(n - 1);
  }
  return psi;
}

std::vector<Vec> pg_guidance(std::span<const Vec> positions, double gamma) {
  check_particles(positions, "pg_guidance");
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("pg_guidance: bandwidth must be positive");
  }
  const std::size_t n = positions.size();
  const Eigen::Index dim = positions.front().size();
  std::vector<Vec> psi(n, Vec::Zero(dim));
  Vec delta(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      delta = positions[i] - positions[j];
      const double k = std::exp(-delta.squaredNorm() / gamma);
      psi[i] += k * delta;
    }
    psi[i] *= 2.0 / gamma / static_cast<double>(n - 1);
  }
  return psi;
}

Vec stein_apply_numeric(const MatrixField& matrix_field,
                        const VectorField& log_density_grad, const Vec& x,
                        double fd_step) {
  if (!(fd_step > 0.0)) {
    throw std::invalid_argument("stein_apply_numeric: step must be positive");
  }
  const Eigen::Index d = x.size();
  const Eigen::MatrixXd center = matrix_field(x);
  if (center.rows() != d || center.cols() != d) {
    throw std::invalid_argument("stein_apply_numeric: matrix field must be d x d");
  }
  Vec divergence = Vec::Zero(d);
  Vec shifted = x;
  for (Eigen::Index b = 0; b < d; ++b) {
    shifted[b] = x[b] + fd_step;
    const Eigen::MatrixXd up = matrix_field(shifted);
    shifted[b] = x[b] - fd_step;
    const Eigen::MatrixXd down = matrix_field(shifted);
    shifted[b] = x[b];
    divergence += (up.col(b) - down.col(b)) / (2.0 * fd_step);
  }
  return divergence + center * log_density_grad(x);
}

}  // namespace eddy
