#pragma once

#include "eddy/sampler.hpp"
#include "eddy/stats.hpp"
#include "eddy/targets.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace eddy {

/// Malformed or unreadable experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RingTarget {
  int modes = 5;
  double radius = 5.0;
  double variance = 1.0;

  GaussianMixture build() const;
};

inline constexpr int kDefaultBatches = 2000;
inline constexpr std::uint64_t kDefaultSweepSeed = 20240917;

/// Everything a GMM sweep depends on. `run.guidance.weight` and `run.method`
/// are overwritten per arm; `run.seed` is unused (arms derive their own).
struct SweepConfig {
  std::uint64_t seed = kDefaultSweepSeed;
  int batches = kDefaultBatches;
  RunConfig run;
  RingTarget target;
  std::vector<double> eddy_weights{0.0, 0.5, 1.75, 3.0};
  std::vector<double> pg_weights{0.0, 0.5, 1.75, 3.0};

  void validate() const;
};

/// Parses a config document. Absent keys keep their defaults; unknown keys,
/// wrong types and invalid values throw ConfigError.
SweepConfig parse_sweep_config(const nlohmann::json& doc);
SweepConfig load_sweep_config(const std::filesystem::path& path);

/// Full echo of the config including defaults. parse_sweep_config accepts it.
nlohmann::json to_json(const SweepConfig& config);

/// Base seeds of the i.i.d. reference arm and of the guided arms. All guided
/// arms share one lineage so weights are compared on common random numbers.
std::uint64_t reference_arm_seed(std::uint64_t seed);
std::uint64_t guided_arm_seed(std::uint64_t seed);

struct ArmResult {
  Method method = Method::iid;
  double weight = 0.0;
  std::uint64_t base_seed = 0;
  std::vector<ParticleBatch> batches;
  std::vector<int> coverage;     // per batch
  std::vector<double> distance;  // particle 0 of each batch
  std::vector<double> angle;

  double coverage_mean() const;
  double coverage_se() const;
};

ArmResult run_arm(const SweepConfig& config, Method method, double weight,
                  std::uint64_t base_seed, int threads);

struct MarginalTest {
  Method method = Method::iid;
  double weight = 0.0;
  std::string metric;  // "distance" or "angle"
  TestResult result;
};

/// KS, Mann-Whitney and Welch on both metrics of `arm` against `reference`.
std::vector<MarginalTest> marginal_tests(const ArmResult& arm,
                                         const ArmResult& reference);

struct SweepResult {
  SweepConfig config;
  double expected_iid_coverage = 0.0;
  ArmResult reference;
  std::vector<ArmResult> arms;  // eddy weights first, then pg weights
  std::vector<MarginalTest> tests;
  double wall_seconds = 0.0;
};

SweepResult run_gmm_sweep(const SweepConfig& config, int threads);

/// Output file name -> contents. report.json carries the timing under a
/// top-level "timing" key and nowhere else.
std::map<std::string, std::string> render_sweep(const SweepResult& result);

nlohmann::json sweep_report(const SweepResult& result);

void write_outputs(const std::filesystem::path& dir,
                   const std::map<std::string, std::string>& files);

}  // namespace eddy
