#pragma once

#include "eddy/guidance.hpp"
#include "eddy/kernels.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace eddy {

using DivFreeFn = std::function<Vec(const RbfBundle&, const Vec&)>;

struct VerifyOptions {
  // Replaceable so tests can check that a broken kernel is caught.
  DivFreeFn divfree = divfree_apply;
  std::uint64_t seed = 0x5eed;
  // Skips the sampling-based marginal check (about 3 s).
  bool quick = false;
};

struct CheckResult {
  std::string id;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Runs every invariant check in a fixed order.
std::vector<CheckResult> run_verify(const VerifyOptions& options = {});

nlohmann::json verify_report(const std::vector<CheckResult>& checks);

enum class SteinRoute {
  nested_differences,  // Stein operator by finite differences of the pair matrix
  closed_form,         // A s + K v from antisym_apply and the div-free kernel
};

struct SteinSymmetryProbe {
  double residual = 0.0;     // max over grid of |div(p F)|
  double drift_scale = 0.0;  // max over grid of |div(p mu)|
  double ratio() const { return residual / drift_scale; }
};

/// div(p_t F) on a 41 x 41 grid covering the noised 5-ring at time t, for F
/// the Stein field of the pair matrices of three frozen neighbours (vectors =
/// reverse VP drift at the neighbours, RBF bandwidth 1). Divergences are
/// central differences with step `step`.
SteinSymmetryProbe stein_symmetry_probe(double t, SteinRoute route,
                                        const DivFreeFn& divfree = divfree_apply,
                                        double step = 1e-3);

/// Largest per-particle relative error |psi_approx - psi_exact| / |psi_exact|
/// over `instances` random configurations of n particles in dimension d, with
/// the RBF (bandwidth 1) as the black box. Positions are Gaussian with mean
/// squared pair distance spread * gamma; scores and neighbour vectors are
/// standard normal. The Hutchinson error grows like (2/gamma)|delta|^2 / sqrt(m).
double estimator_relative_error(int n, int d, double epsilon, int probes,
                                int instances, std::uint64_t seed,
                                double spread = 0.25);

/// |fd_hvp(2 eps) - H v| / |fd_hvp(eps) - H v| for the RBF at a random point.
double fd_hvp_richardson_ratio(int d, double epsilon, std::uint64_t seed);

}  // namespace eddy
