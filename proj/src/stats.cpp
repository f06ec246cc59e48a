#include "eddy/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace eddy {

std::string_view to_string(TestName t) {
  switch (t) {
    case TestName::ks: return "ks";
    case TestName::mann_whitney: return "mann_whitney";
    case TestName::welch: return "welch";
  }
  return "unknown";
}

namespace {

Eigen::Index nearest_center(const Vec& x, const Eigen::MatrixXd& centers,
                            double* sq_out = nullptr) {
  Eigen::Index best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < centers.rows(); ++l) {
    const double sq = (x.transpose() - centers.row(l)).squaredNorm();
    if (sq < best_sq) {
      best_sq = sq;
      best = l;
    }
  }
  if (sq_out) *sq_out = best_sq;
  return best;
}

void require_nonempty(std::span<const double> a, std::span<const double> b,
                      const char* who) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument(std::string(who) + ": empty sample");
  }
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int mode_coverage(std::span<const Vec> particles, const Eigen::MatrixXd& centers) {
  if (particles.empty() || centers.rows() == 0) {
    throw std::invalid_argument("mode_coverage: empty input");
  }
  std::vector<bool> hit(static_cast<std::size_t>(centers.rows()), false);
  for (const Vec& x : particles) {
    if (x.size() != centers.cols()) {
      throw std::invalid_argument("mode_coverage: dimension mismatch");
    }
    hit[static_cast<std::size_t>(nearest_center(x, centers))] = true;
  }
  return static_cast<int>(std::count(hit.begin(), hit.end(), true));
}

double expected_iid_coverage(int m, int n) {
  if (m < 1 || n < 1) {
    throw std::invalid_argument("expected_iid_coverage: m and n must be positive");
  }
  const double miss = std::pow(1.0 - 1.0 / m, n);
  return m * (1.0 - miss);
}

NearestMode nearest_mode_stats(const Vec& x, const Eigen::MatrixXd& centers) {
  if (x.size() != 2 || centers.cols() != 2) {
    throw std::invalid_argument("nearest_mode_stats: only 2-D points are supported");
  }
  if (centers.rows() == 0) {
    throw std::invalid_argument("nearest_mode_stats: no centers");
  }
  NearestMode out;
  double sq = 0.0;
  out.index = nearest_center(x, centers, &sq);
  out.distance = std::sqrt(sq);
  if (out.distance == 0.0) {
    out.angle = 0.0;
    return out;
  }
  const double dx = x[0] - centers(out.index, 0);
  const double dy = x[1] - centers(out.index, 1);
  out.angle = std::atan2(dy, dx);
  if (out.angle <= -std::numbers::pi) out.angle = std::numbers::pi;
  return out;
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta form of the CDF converges fast for small lambda.
    const double y = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      sum += std::exp(-odd * odd * y);
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double student_t_two_sided(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (!(df > 0.0)) {
    throw std::invalid_argument("student_t_two_sided: degrees of freedom must be positive");
  }
  const boost::math::students_t_distribution<double> dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))),
                    0.0, 1.0);
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "ks_two_sample");
  const std::vector<double> sa = sorted_copy(a);
  const std::vector<double> sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  TestResult r;
  r.test = TestName::ks;
  r.statistic = d;
  r.sample_sizes = {sa.size(), sb.size()};
  const double effective = na * nb / (na + nb);
  r.p_value = kolmogorov_survival(std::sqrt(effective) * d);
  return r;
}

TestResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "mann_whitney");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t total = na + nb;
  std::vector<std::pair<double, bool>> pooled;  // (value, from a)
  pooled.reserve(total);
  for (double x : a) pooled.emplace_back(x, true);
  for (double x : b) pooled.emplace_back(x, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum over tie groups of t^3 - t
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) rank_sum_a += midrank;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(total);
  const double u_a = rank_sum_a - dna * (dna + 1.0) / 2.0;
  const double u_b = dna * dnb - u_a;
  const double mean = dna * dnb / 2.0;
  const double variance = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));

  TestResult r;
  r.test = TestName::mann_whitney;
  r.statistic = u_a / (dna * dnb);
  r.sample_sizes = {na, nb};
  if (!(variance > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  // z of the larger U with continuity correction; p = 2 P(Z > z), capped at 1
  const double z = (std::max(u_a, u_b) - 0.5 - mean) / std::sqrt(variance);
  r.p_value = std::min(1.0, std::erfc(z / std::numbers::sqrt2));
  return r;
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("welch_t: each sample needs at least two values");
  }
  auto moments = [](std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [mean_a, var_a] = moments(a);
  const auto [mean_b, var_b] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = var_a / na;
  const double qb = var_b / nb;
  const double se2 = qa + qb;

  TestResult r;
  r.test = TestName::welch;
  r.sample_sizes = {a.size(), b.size()};
  const double diff = mean_a - mean_b;
  if (!(se2 > 0.0)) {
    r.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = diff / std::sqrt(se2);
  const double df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  r.p_value = r.statistic == 0.0 ? 1.0 : student_t_two_sided(r.statistic, df);
  return r;
}

double permutation_p_value(std::span<const double> a, std::span<const double> b,
                           const TwoSampleStatistic& extremeness, int shuffles,
                           Rng& rng) {
  require_nonempty(a, b, "permutation_p_value");
  if (shuffles < 1) {
    throw std::invalid_argument("permutation_p_value: need at least one shuffle");
  }
  const double observed = extremeness(a, b);
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::span<const double> all(pooled);
  int at_least = 0;
  for (int s = 0; s < shuffles; ++s) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    const double value = extremeness(all.first(a.size()), all.subspan(a.size()));
    if (value >= observed) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + shuffles);
}

}  // namespace eddy
