#include "eddy/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace eddy {

namespace {

void check_pair(const Vec& x, const Vec& y, double gamma) {
  if (x.size() == 0) {
    throw std::invalid_argument("rbf: empty kernel point");
  }
  if (x.size() != y.size()) {
    throw std::invalid_argument("rbf: dimension mismatch (" +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("rbf: bandwidth must be positive and finite");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("rbf: non-finite kernel point");
  }
}

}  // namespace

Vec RbfBundle::hessian_apply(const Vec& v) const {
  if (v.size() != delta.size()) {
    throw std::invalid_argument("hessian_apply: dimension mismatch");
  }
  const double a = hessian_scale();
  return -a * (v - (2.0 / gamma) * delta.dot(v) * delta);
}

double rbf_eval(const Vec& x, const Vec& y, double gamma) {
  check_pair(x, y, gamma);
  return std::exp(-(x - y).squaredNorm() / gamma);
}

RbfBundle rbf_bundle(const Vec& x, const Vec& y, double gamma) {
  check_pair(x, y, gamma);
  RbfBundle b;
  b.gamma = gamma;
  b.delta = x - y;
  const double sq = b.delta.squaredNorm();
  b.value = std::exp(-sq / gamma);
  const double a = 2.0 / gamma * b.value;
  b.gradient = -a * b.delta;
  const double d = static_cast<double>(x.size());
  b.laplacian = -a * (d - 2.0 / gamma * sq);
  return b;
}

BlackBoxKernel rbf_black_box(double gamma) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("rbf_black_box: bandwidth must be positive");
  }
  BlackBoxKernel k;
  k.value = [gamma](const Vec& x, const Vec& y) {
    return std::exp(-(x - y).squaredNorm() / gamma);
  };
  k.gradient = [gamma](const Vec& x, const Vec& y) -> Vec {
    const Vec delta = x - y;
    return (-2.0 / gamma * std::exp(-delta.squaredNorm() / gamma)) * delta;
  };
  return k;
}

Vec fd_hvp(const BlackBoxKernel& kernel, const Vec& x, const Vec& y,
           const Vec& v, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("fd_hvp: epsilon must be positive");
  }
  if (v.size() != x.size() || y.size() != x.size()) {
    throw std::invalid_argument("fd_hvp: dimension mismatch");
  }
  if (!kernel.gradient) {
    throw std::invalid_argument("fd_hvp: kernel has no gradient");
  }
  const Vec plus = kernel.gradient(x + epsilon * v, y);
  const Vec minus = kernel.gradient(x - epsilon * v, y);
  return (plus - minus) / (2.0 * epsilon);
}

void rademacher_fill(Vec& out, Rng& rng) {
  std::uint64_t bits = 0;
  int left = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (left == 0) {
      bits = rng();
      left = 64;
    }
    out[i] = (bits & 1u) ? 1.0 : -1.0;
    bits >>= 1;
    --left;
  }
}

double hutchinson_laplacian(const KernelValueFn& value, const Vec& x,
                            const Vec& y, double epsilon, int probes,
                            Rng& rng) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("hutchinson_laplacian: epsilon must be positive");
  }
  if (probes < 1) {
    throw std::invalid_argument("hutchinson_laplacian: need at least one probe");
  }
  if (x.size() != y.size() || x.size() == 0) {
    throw std::invalid_argument("hutchinson_laplacian: dimension mismatch");
  }
  const double center = value(x, y);
  Vec probe(x.size());
  Vec shifted(x.size());
  double sum = 0.0;
  for (int l = 0; l < probes; ++l) {
    rademacher_fill(probe, rng);
    shifted = x + epsilon * probe;
    const double up = value(shifted, y);
    shifted = x - epsilon * probe;
    const double down = value(shifted, y);
    sum += (up - 2.0 * center + down);
  }
  return sum / (static_cast<double>(probes) * epsilon * epsilon);
}

}  // namespace eddy
