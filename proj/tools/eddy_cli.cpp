// eddy: GMM guidance sweeps, invariant verification and the dimension-scaling
// measurement.
//
// Exit codes: 0 success, 1 failed verification or I/O error, 2 bad config or
// usage, 3 numerical failure during integration.

#include "eddy/experiment.hpp"
#include "eddy/report_io.hpp"
#include "eddy/scaling.hpp"
#include "eddy/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int cmd_gmm_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out,
                  int threads, std::optional<std::uint64_t> seed) {
  eddy::SweepConfig config;
  try {
    config = eddy::load_sweep_config(config_path);
    if (seed) config.seed = *seed;
  } catch (const eddy::ConfigError& e) {
    std::cerr << "eddy gmm-sweep: bad config: " << e.what() << '\n';
    return kExitConfig;
  }
  eddy::SweepResult result;
  try {
    result = eddy::run_gmm_sweep(config, threads);
  } catch (const eddy::IntegrationError& e) {
    std::cerr << "eddy gmm-sweep: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  eddy::write_outputs(out, eddy::render_sweep(result));

  std::cout << "reference iid coverage " << eddy::format_double(result.reference.coverage_mean())
            << " (expected " << eddy::format_double(result.expected_iid_coverage) << ")\n";
  for (const eddy::ArmResult& arm : result.arms) {
    std::cout << eddy::to_string(arm.method) << " w_g=" << arm.weight << " coverage "
              << arm.coverage_mean() << " +- " << arm.coverage_se() << '\n';
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_verify(const std::filesystem::path& out, std::optional<std::uint64_t> seed) {
  eddy::VerifyOptions options;
  if (seed) options.seed = *seed;
  const std::vector<eddy::CheckResult> checks = eddy::run_verify(options);
  eddy::write_text_file(out / "verify.json", eddy::dump_json(eddy::verify_report(checks)));
  int failed = 0;
  for (const eddy::CheckResult& c : checks) {
    std::cout << (c.passed ? "ok   " : "FAIL ") << c.id << "  value " << eddy::format_double(c.value)
              << "  " << c.detail << '\n';
    failed += !c.passed;
  }
  if (failed) {
    std::cerr << failed << " check(s) failed:";
    for (const eddy::CheckResult& c : checks) {
      if (!c.passed) std::cerr << ' ' << c.id;
    }
    std::cerr << '\n';
    return kExitFailure;
  }
  std::cout << checks.size() << " checks passed\n";
  return 0;
}

int cmd_scaling(const std::filesystem::path& out, std::optional<std::uint64_t> seed) {
  const eddy::ScalingReport report =
      eddy::run_scaling(eddy::kScalingDims, eddy::kScalingGammas, 1.0, 64, seed.value_or(0xc0ffee));
  eddy::write_text_file(out / "scaling.csv", eddy::render_scaling_csv(report));
  for (const eddy::ScalingFit& f : report.fits) {
    std::cout << "gamma " << f.gamma << ": slope " << eddy::format_double(f.slope) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal-preserving particle guidance on Gaussian-mixture targets"};
  app.require_subcommand(0, 1);

  bool show_version = false;
  app.add_flag("--version", show_version, "Print artifact and report schema versions");

  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir;
  int threads = default_threads();

  auto* sweep = app.add_subcommand("gmm-sweep", "Coverage and marginal tests over guidance weights");
  sweep->add_option("--config", config_path, "JSON config")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", seed, "Override the config seed");

  auto* verify = app.add_subcommand("verify", "Run the invariant checks");
  verify->add_option("--out", out_dir, "Output directory")->required();
  verify->add_option("--seed", seed, "Seed for randomized checks");

  auto* scaling = app.add_subcommand("scaling", "Measure |A s| / |K v| against dimension");
  scaling->add_option("--out", out_dir, "Output directory")->required();
  scaling->add_option("--seed", seed, "Seed for the random geometries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (show_version) {
    std::cout << "eddy " << eddy::kArtifactVersion << " (report schema "
              << eddy::kReportSchemaVersion << ")\n";
    return 0;
  }

  try {
    if (sweep->parsed()) return cmd_gmm_sweep(config_path, out_dir, threads, seed);
    if (verify->parsed()) return cmd_verify(out_dir, seed);
    if (scaling->parsed()) return cmd_scaling(out_dir, seed);
  } catch (const std::exception& e) {
    std::cerr << "eddy: " << e.what() << '\n';
    return kExitFailure;
  }
  std::cout << app.help();
  return kExitConfig;
}
