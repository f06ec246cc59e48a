// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Informational lines start with "  info".

#include "eddy/experiment.hpp"
#include "eddy/report_io.hpp"
#include "eddy/scaling.hpp"
#include "eddy/seeding.hpp"
#include "eddy/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace {

using eddy::ArmResult;
using eddy::Method;
using eddy::SweepConfig;

constexpr int kThreads = 1;
constexpr int kReps = 20;
constexpr double kGuidedWeights[] = {0.5, 1.75, 3.0};

int failures = 0;

void verdict(int id, bool pass, const std::string& what) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  failures += !pass;
}

template <typename... Args>
void info(const char* fmt, Args... args) {
  std::printf("  info ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

SweepConfig rep_config(int rep) {
  SweepConfig c;
  c.seed = eddy::kDefaultSweepSeed + static_cast<std::uint64_t>(rep);
  return c;
}

bool all_pass(const std::vector<eddy::MarginalTest>& tests) {
  return std::all_of(tests.begin(), tests.end(),
                     [](const eddy::MarginalTest& t) { return t.result.p_value > 0.05; });
}

std::string strip_timing(const std::string& report) {
  nlohmann::json j = nlohmann::json::parse(report);
  j.erase("timing");
  return j.dump();
}

}  // namespace

int main() {
  const auto total_start = std::chrono::steady_clock::now();
  const SweepConfig base = rep_config(0);

  // Criterion 1: i.i.d. baseline
  const auto c1_start = std::chrono::steady_clock::now();
  const ArmResult reference0 =
      eddy::run_arm(base, Method::iid, 0.0, eddy::reference_arm_seed(base.seed), kThreads);
  const double c1_seconds = seconds_since(c1_start);
  {
    const double expected = eddy::expected_iid_coverage(5, 5);
    const double mean = reference0.coverage_mean(), se = reference0.coverage_se();
    const double z = (mean - expected) / se;
    verdict(1, std::abs(z) <= 2.0 && c1_seconds <= 120.0,
            "iid coverage " + fmt("%.4f", mean) + " +- " + fmt("%.4f", se) + " over " +
                std::to_string(reference0.coverage.size()) + " batches vs " + fmt("%.4f", expected) +
                " (z = " + fmt("%.2f", z) + ", limit |z| <= 2); " + fmt("%.1f", c1_seconds) + " s <= 120 s");
  }

  // Criterion 2: coverage curve on the default sweep (guided arms share seeds).
  std::vector<ArmResult> curve;
  const std::uint64_t guided0 = eddy::guided_arm_seed(base.seed);
  curve.push_back(eddy::run_arm(base, Method::eddy, 0.0, guided0, kThreads));
  for (double w : kGuidedWeights) curve.push_back(eddy::run_arm(base, Method::eddy, w, guided0, kThreads));
  {
    for (const ArmResult& a : curve) {
      info("eddy w_g=%.2f coverage %.4f +- %.4f", a.weight, a.coverage_mean(), a.coverage_se());
    }
    const double gain = curve[2].coverage_mean() - curve[0].coverage_mean();
    const double se = curve[2].coverage_se();
    bool strictly_above = true;
    for (std::size_t k = 1; k < curve.size(); ++k) {
      strictly_above &= curve[k].coverage_mean() > curve[0].coverage_mean();
    }
    bool monotone = true;
    for (std::size_t k = 1; k < curve.size(); ++k) {
      monotone &= curve[k].coverage_mean() >= curve[k - 1].coverage_mean() - curve[k].coverage_se();
    }
    verdict(2, strictly_above && gain >= 3 * se && monotone,
            "coverage(1.75) - coverage(0) = " + fmt("%.4f", gain) + " = " + fmt("%.2f", gain / se) +
                " SE (need >= 3); all guided weights above w_g=0: " + (strictly_above ? "yes" : "no") +
                "; nondecreasing within 1 SE: " + (monotone ? "yes" : "no"));
  }

  // Criteria 3 and 4 share the 20 seeded repetitions and their reference arms.
  const auto c3_start = std::chrono::steady_clock::now();
  std::vector<ArmResult> references;
  std::array<std::array<int, 6>, 3> cell_pass{};
  for (int rep = 0; rep < kReps; ++rep) {
    const SweepConfig c = rep_config(rep);
    references.push_back(rep == 0 ? reference0
                                  : eddy::run_arm(c, Method::iid, 0.0, eddy::reference_arm_seed(c.seed), kThreads));
    for (std::size_t k = 0; k < 3; ++k) {
      const ArmResult arm =
          rep == 0 ? curve[k + 1]
                   : eddy::run_arm(c, Method::eddy, kGuidedWeights[k], eddy::guided_arm_seed(c.seed), kThreads);
      const auto tests = eddy::marginal_tests(arm, references.back());
      for (std::size_t j = 0; j < 6; ++j) cell_pass[k][j] += tests[j].result.p_value > 0.05;
    }
    references.back().batches.clear();
  }
  const double c3_seconds = seconds_since(c3_start);
  {
    const char* names[6] = {"distance/ks", "distance/mw", "distance/welch", "angle/ks", "angle/mw", "angle/welch"};
    int worst = kReps;
    bool pass = true;
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < 6; ++j) {
        info("eddy w_g=%.2f %-15s p > 0.05 in %d/%d", kGuidedWeights[k], names[j], cell_pass[k][j], kReps);
        worst = std::min(worst, cell_pass[k][j]);
        pass &= cell_pass[k][j] * 5 >= kReps * 4;
      }
    }
    verdict(3, pass && c3_seconds <= 600.0,
            "worst of 18 (w_g, metric, test) cells has p > 0.05 in " + std::to_string(worst) + "/" +
                std::to_string(kReps) + " repetitions (need >= 80%); " + fmt("%.1f", c3_seconds) + " s <= 600 s");
  }

  // Criterion 4: PG at the weight whose coverage matches EDDY at w_g = 1.75.
  {
    const double target = curve[2].coverage_mean();
    auto pg_coverage = [&](double w) {
      return eddy::run_arm(base, Method::pg, w, guided0, kThreads).coverage_mean();
    };
    double lo = 0.0, hi = 6.0;
    const double at_zero = pg_coverage(0.0);
    double matched = 0.0;
    if (at_zero < target) {
      for (int it = 0; it < 10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pg_coverage(mid) < target ? lo : hi) = mid;
      }
      matched = hi;
    }
    info("pg coverage target %.4f (eddy w_g=1.75); pg w_g=0 gives %.4f; matched pg weight %.4f", target, at_zero,
         matched);
    int distorted = 0;
    for (int rep = 0; rep < kReps; ++rep) {
      const SweepConfig c = rep_config(rep);
      const ArmResult pg = eddy::run_arm(c, Method::pg, matched, eddy::guided_arm_seed(c.seed), kThreads);
      if (rep == 0) info("pg w_g=%.4f coverage %.4f +- %.4f", matched, pg.coverage_mean(), pg.coverage_se());
      distorted += !all_pass(eddy::marginal_tests(pg, references[static_cast<std::size_t>(rep)]));
    }
    // Context only: how strong PG has to be before it distorts the marginal.
    for (double w : {3.0, 6.0, 12.0}) {
      int d = 0;
      for (int rep = 0; rep < 5; ++rep) {
        const SweepConfig c = rep_config(rep);
        d += !all_pass(eddy::marginal_tests(eddy::run_arm(c, Method::pg, w, eddy::guided_arm_seed(c.seed), kThreads),
                                            references[static_cast<std::size_t>(rep)]));
      }
      info("pg w_g=%.1f fails a marginal test in %d/5 repetitions", w, d);
    }
    verdict(4, distorted * 5 >= kReps * 4,
            "pg at matched weight " + fmt("%.4f", matched) + " fails >= 1 marginal test in " +
                std::to_string(distorted) + "/" + std::to_string(kReps) + " repetitions (need >= 80%)");
  }

  // Criterion 5: estimator fidelity and second-order HVP.
  {
    const double e8 = eddy::estimator_relative_error(3, 8, 1e-3, 2000, 20, 0xacce55);
    const double e64 = eddy::estimator_relative_error(3, 64, 1e-3, 2000, 20, 0xacce56);
    info("bandwidth-scale spread (E|delta|^2 = gamma): d=8 %.4f, d=64 %.4f",
         eddy::estimator_relative_error(3, 8, 1e-3, 2000, 20, 0xacce55, 1.0),
         eddy::estimator_relative_error(3, 64, 1e-3, 2000, 20, 0xacce56, 1.0));
    double worst_ratio_gap = 0.0;
    std::string ratios;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      const double r = eddy::fd_hvp_richardson_ratio(s % 2 ? 8 : 64, 1e-3, s);
      worst_ratio_gap = std::max(worst_ratio_gap, std::abs(r - 4.0));
      ratios += (ratios.empty() ? "" : ", ") + fmt("%.3f", r);
    }
    verdict(5, e8 <= 0.01 && e64 <= 0.01 && worst_ratio_gap <= 0.5,
            "max relative error d=8 " + fmt("%.4f", e8) + ", d=64 " + fmt("%.4f", e64) +
                " (limit 0.01); Richardson ratios " + ratios + " (4 +- 0.5)");
  }

  // Criterion 6: Stein symmetry on the noised ring.
  {
    double worst = 0.0;
    std::string ratios;
    for (double t : {0.25, 0.5, 0.75}) {
      const double r = eddy::stein_symmetry_probe(t, eddy::SteinRoute::nested_differences).ratio();
      worst = std::max(worst, r);
      ratios += (ratios.empty() ? "" : ", ") + fmt("t=%.2f ", t) + fmt("%.2e", r);
    }
    verdict(6, worst <= 1e-4, "max|div(p F)| / max|div(p mu)|: " + ratios + " (limit 1e-4)");
  }

  // Criterion 7: dimension scaling.
  const eddy::ScalingReport scaling =
      eddy::run_scaling(eddy::kScalingDims, eddy::kScalingGammas, 1.0, 64, 0xc0ffee);
  {
    bool pass = true;
    std::string slopes;
    for (const eddy::ScalingFit& f : scaling.fits) {
      pass &= f.slope >= -0.65 && f.slope <= -0.35;
      slopes += (slopes.empty() ? "" : ", ") + fmt("gamma=%.0f ", f.gamma) + fmt("%.3f", f.slope);
    }
    verdict(7, pass, "log-log slopes " + slopes + " (band [-0.65, -0.35])");
  }

  // Criterion 8: null calibration at the pooled sample size.
  {
    eddy::Rng rng(0xca11b);
    std::normal_distribution<double> normal(0.0, 1.0);
    int rejections[3] = {0, 0, 0};
    std::vector<double> a(2000), b(2000);
    for (int r = 0; r < 1000; ++r) {
      for (double& x : a) x = normal(rng);
      for (double& x : b) x = normal(rng);
      rejections[0] += eddy::ks_two_sample(a, b).p_value < 0.05;
      rejections[1] += eddy::mann_whitney(a, b).p_value < 0.05;
      rejections[2] += eddy::welch_t(a, b).p_value < 0.05;
    }
    bool pass = true;
    for (int k : rejections) pass &= k >= 30 && k <= 80;
    verdict(8, pass,
            "null rejection rates over 1000 pairs of 2000: ks " + fmt("%.3f", rejections[0] / 1000.0) + ", mw " +
                fmt("%.3f", rejections[1] / 1000.0) + ", welch " + fmt("%.3f", rejections[2] / 1000.0) +
                " (band [0.03, 0.08])");
  }

  // Criterion 9: byte-identical outputs across reruns and thread counts.
  {
    SweepConfig small = base;
    small.batches = 400;
    const auto one = eddy::render_sweep(eddy::run_gmm_sweep(small, 1));
    const auto four = eddy::render_sweep(eddy::run_gmm_sweep(small, 4));
    const auto again = eddy::render_sweep(eddy::run_gmm_sweep(small, 1));
    bool sweep_same = one.size() == four.size();
    for (const auto& [name, text] : one) {
      const bool report = name == "report.json";
      for (const auto* other : {&four, &again}) {
        const std::string& t = other->at(name);
        sweep_same &= report ? strip_timing(text) == strip_timing(t) : text == t;
      }
    }
    const bool scaling_same =
        eddy::render_scaling_csv(scaling) ==
        eddy::render_scaling_csv(eddy::run_scaling(eddy::kScalingDims, eddy::kScalingGammas, 1.0, 64, 0xc0ffee));
    eddy::VerifyOptions quick;
    quick.quick = true;
    const bool verify_same = eddy::dump_json(eddy::verify_report(eddy::run_verify(quick))) ==
                             eddy::dump_json(eddy::verify_report(eddy::run_verify(quick)));
    verdict(9, sweep_same && scaling_same && verify_same,
            std::string("gmm-sweep files identical for threads 1/4/1 (timing excluded): ") +
                (sweep_same ? "yes" : "no") + "; scaling.csv rerun: " + (scaling_same ? "yes" : "no") +
                "; verify.json rerun: " + (verify_same ? "yes" : "no"));
  }

  std::printf("%d of 9 criteria passed (%.0f s)\n", 9 - failures, seconds_since(total_start));
  return failures == 0 ? 0 : 1;
}
