#include "eddy/scaling.hpp"

#include "eddy/guidance.hpp"
#include "eddy/kernels.hpp"
#include "eddy/report_io.hpp"
#include "eddy/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace eddy {

namespace {

Vec random_direction(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec u(d);
  for (Eigen::Index k = 0; k < d; ++k) u[k] = normal(rng);
  return u.normalized();
}

}  // namespace

ScalingReport run_scaling(std::span<const int> dims, std::span<const double> gammas,
                          double delta_norm, int draws, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("run_scaling: need at least two dimensions");
  if (draws < 1) throw std::invalid_argument("run_scaling: need at least one draw");
  if (!(delta_norm > 0.0)) throw std::invalid_argument("run_scaling: |delta| must be positive");
  ScalingReport report;
  report.delta_norm = delta_norm;
  for (double gamma : gammas) {
    if (!(gamma > 0.0)) throw std::invalid_argument("run_scaling: bandwidth must be positive");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int d : dims) {
      if (d < 2) throw std::invalid_argument("run_scaling: dimension must be at least 2");
      // Same geometry stream for every bandwidth at a given d.
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
      const double root_d = std::sqrt(static_cast<double>(d));
      double sum = 0.0, sum_sq = 0.0;
      for (int k = 0; k < draws; ++k) {
        const Vec xi = root_d * random_direction(d, rng);
        const Vec xj = xi - delta_norm * random_direction(d, rng);
        const Vec s = -xi;
        const Vec v = -root_d * xj.normalized();
        const RbfBundle b = rbf_bundle(xi, xj, gamma);
        const double ratio =
            antisym_apply(-b.gradient, v, s).norm() / divfree_apply(b, v).norm();
        sum += ratio;
        sum_sq += ratio * ratio;
      }
      ScalingSample sample;
      sample.dim = d;
      sample.gamma = gamma;
      sample.draws = draws;
      sample.ratio_mean = sum / draws;
      sample.ratio_sd =
          draws > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / draws) / (draws - 1))) : 0.0;
      report.samples.push_back(sample);
      const double lx = std::log(static_cast<double>(d));
      const double ly = std::log(sample.ratio_mean);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double n = static_cast<double>(dims.size());
    ScalingFit fit;
    fit.gamma = gamma;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    report.fits.push_back(fit);
  }
  return report;
}

std::string render_scaling_csv(const ScalingReport& report) {
  std::ostringstream out;
  out << "dimension_count,gamma_sq_coord_units,delta_norm_coord_units,draws_count,"
         "ratio_mean_dimensionless,ratio_sd_dimensionless,fitted_slope_dimensionless\n";
  for (const ScalingSample& s : report.samples) {
    double slope = std::nan("");
    for (const ScalingFit& f : report.fits) {
      if (f.gamma == s.gamma) slope = f.slope;
    }
    out << s.dim << ',' << format_double(s.gamma) << ',' << format_double(report.delta_norm)
        << ',' << s.draws << ',' << format_double(s.ratio_mean) << ','
        << format_double(s.ratio_sd) << ',' << format_double(slope) << '\n';
  }
  return out.str();
}

}  // namespace eddy
