#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eddy {

/// Mean of |A s| / |K v| over random pair geometries at one (d, gamma).
struct ScalingSample {
  int dim = 0;
  double gamma = 0.0;
  double ratio_mean = 0.0;
  double ratio_sd = 0.0;
  int draws = 0;
};

/// Least-squares line through (log d, log ratio_mean) for one bandwidth.
struct ScalingFit {
  double gamma = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
};

struct ScalingReport {
  double delta_norm = 0.0;
  std::vector<ScalingSample> samples;
  std::vector<ScalingFit> fits;
};

inline constexpr int kScalingDims[] = {16, 64, 256, 1024};
inline constexpr double kScalingGammas[] = {1.0, 2.0};

/// Pair geometry with |x_i - x_j| = delta_norm and |s| = |v| = sqrt(d), where
/// s = -x_i and v points along -x_j, x_i uniform on the sphere of radius
/// sqrt(d). This is the aligned case where <v, s> grows like d, so the
/// anti-symmetric term is as large as it can be relative to K v.
ScalingReport run_scaling(std::span<const int> dims, std::span<const double> gammas,
                          double delta_norm, int draws, std::uint64_t seed);

/// Header row names columns and units; each row repeats its bandwidth's slope.
std::string render_scaling_csv(const ScalingReport& report);

}  // namespace eddy
