#pragma once

#include "eddy/kernels.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <utility>

namespace eddy {

enum class TestName { ks, mann_whitney, welch };

std::string_view to_string(TestName t);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestName test = TestName::ks;
  std::pair<std::size_t, std::size_t> sample_sizes{0, 0};
};

/// Number of distinct centers that are the nearest center of at least one
/// particle. Ties go to the lowest center index.
int mode_coverage(std::span<const Vec> particles, const Eigen::MatrixXd& centers);

/// m (1 - (1 - 1/m)^n): expected coverage of n independent particles over m
/// equally likely modes.
double expected_iid_coverage(int m, int n);

struct NearestMode {
  double distance = 0.0;
  double angle = 0.0;  // in (-pi, pi]; 0 when the point sits on the center
  Eigen::Index index = 0;
};

/// Distance to the nearest center and the polar angle of x around it. 2-D only.
NearestMode nearest_mode_stats(const Vec& x, const Eigen::MatrixXd& centers);

/// Two-sample Kolmogorov-Smirnov. p-value from the asymptotic Kolmogorov
/// distribution at sqrt(n_a n_b / (n_a + n_b)) D.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Mann-Whitney U. The statistic is U_a / (n_a n_b), the estimate of
/// P(a > b) + P(a = b) / 2, so it is 0 when every a lies below every b.
/// Two-sided normal approximation with tie-corrected variance and continuity
/// correction.
TestResult mann_whitney(std::span<const double> a, std::span<const double> b);

/// Welch's unequal-variance t-test, Welch-Satterthwaite degrees of freedom,
/// two-sided Student-t p-value. The statistic is positive when mean(a) > mean(b).
TestResult welch_t(std::span<const double> a, std::span<const double> b);

/// Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

/// Two-sided Student-t tail probability 2 P(T_df > |t|).
double student_t_two_sided(double t, double df);

using TwoSampleStatistic =
    std::function<double(std::span<const double>, std::span<const double>)>;

/// Permutation p-value (1 + #{perm >= observed}) / (1 + shuffles) for a
/// statistic where larger values are more extreme.
double permutation_p_value(std::span<const double> a, std::span<const double> b,
                           const TwoSampleStatistic& extremeness, int shuffles,
                           Rng& rng);

}  // namespace eddy
