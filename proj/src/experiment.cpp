#include "eddy/experiment.hpp"

#include "eddy/report_io.hpp"
#include "eddy/seeding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace eddy {

namespace {

using nlohmann::json;

constexpr std::uint64_t kReferenceLabel = 0x696964;  // "iid"
constexpr std::uint64_t kGuidedLabel = 0x677569646564;  // "guided"

// Walks one JSON object, remembering which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path)
      : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void take(const char* key, const std::function<void(const json&, const std::string&)>& read) {
    const auto it = object_.find(key);
    if (it == object_.end()) return;
    seen_.insert(key);
    read(*it, path_ + "." + key);
  }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown key " + path_ + "." + item.key());
      }
    }
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

double read_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path + ": must be finite");
  return x;
}

int read_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(path + ": out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t read_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError(path + ": expected a nonnegative integer");
}

std::string read_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> read_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(read_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

DynamicsMode parse_dynamics(const std::string& s, const std::string& path) {
  if (s == "vp_ddpm") return DynamicsMode::vp_ddpm;
  if (s == "ot_fm") return DynamicsMode::ot_fm;
  throw ConfigError(path + ": expected \"vp_ddpm\" or \"ot_fm\"");
}

NeighborMode parse_neighbor_mode(const std::string& s, const std::string& path) {
  if (s == "drift") return NeighborMode::drift;
  if (s == "sigma_score") return NeighborMode::sigma_score;
  throw ConfigError(path + ": expected \"drift\" or \"sigma_score\"");
}

std::string_view to_string(NeighborMode m) {
  return m == NeighborMode::drift ? "drift" : "sigma_score";
}

void parse_estimator(const json& v, const std::string& path, GuidanceEstimator& out) {
  ObjectReader r(v, path);
  std::string kind = "exact";
  ApproximateEstimator approx;
  r.take("kind", [&](const json& x, const std::string& p) { kind = read_string(x, p); });
  r.take("epsilon", [&](const json& x, const std::string& p) { approx.epsilon = read_number(x, p); });
  r.take("probes", [&](const json& x, const std::string& p) { approx.probes = read_int(x, p); });
  r.finish();
  if (kind == "exact") {
    out = ExactRbf{};
  } else if (kind == "approximate") {
    out = approx;
  } else {
    throw ConfigError(path + ".kind: expected \"exact\" or \"approximate\"");
  }
}

double mean_of(const std::vector<int>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

GaussianMixture RingTarget::build() const { return ring_mixture(modes, radius, variance); }

void SweepConfig::validate() const {
  if (batches < 2) throw ConfigError("batches must be at least 2");
  if (target.modes < 1) throw ConfigError("target.modes must be at least 1");
  if (!(target.variance > 0.0)) throw ConfigError("target.variance must be positive");
  if (!std::isfinite(target.radius)) throw ConfigError("target.radius must be finite");
  for (const auto* grid : {&eddy_weights, &pg_weights}) {
    for (double w : *grid) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ConfigError("guidance weights must be finite and nonnegative");
      }
    }
  }
  RunConfig probe = run;
  probe.method = (eddy_weights.empty() && pg_weights.empty()) ? Method::iid : Method::eddy;
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SweepConfig parse_sweep_config(const nlohmann::json& doc) {
  SweepConfig c;
  ObjectReader r(doc, "config");
  r.take("seed", [&](const json& v, const std::string& p) { c.seed = read_u64(v, p); });
  r.take("batches", [&](const json& v, const std::string& p) { c.batches = read_int(v, p); });
  r.take("steps", [&](const json& v, const std::string& p) { c.run.steps = read_int(v, p); });
  r.take("particles", [&](const json& v, const std::string& p) { c.run.particles = read_int(v, p); });
  r.take("dynamics", [&](const json& v, const std::string& p) {
    c.run.dynamics = parse_dynamics(read_string(v, p), p);
  });
  r.take("schedule", [&](const json& v, const std::string& p) {
    ObjectReader s(v, p);
    double lo = c.run.schedule.beta_min();
    double hi = c.run.schedule.beta_max();
    s.take("beta_min", [&](const json& x, const std::string& q) { lo = read_number(x, q); });
    s.take("beta_max", [&](const json& x, const std::string& q) { hi = read_number(x, q); });
    s.finish();
    try {
      c.run.schedule = VPSchedule(lo, hi);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p + ": " + e.what());
    }
  });
  r.take("target", [&](const json& v, const std::string& p) {
    ObjectReader t(v, p);
    t.take("modes", [&](const json& x, const std::string& q) { c.target.modes = read_int(x, q); });
    t.take("radius", [&](const json& x, const std::string& q) { c.target.radius = read_number(x, q); });
    t.take("variance", [&](const json& x, const std::string& q) { c.target.variance = read_number(x, q); });
    t.finish();
  });
  r.take("guidance", [&](const json& v, const std::string& p) {
    ObjectReader g(v, p);
    GuidanceConfig& gc = c.run.guidance;
    g.take("gamma", [&](const json& x, const std::string& q) { gc.gamma = read_number(x, q); });
    g.take("stop_ratio", [&](const json& x, const std::string& q) { gc.stop_ratio = read_number(x, q); });
    g.take("neighbor_mode", [&](const json& x, const std::string& q) {
      gc.neighbor_mode = parse_neighbor_mode(read_string(x, q), q);
    });
    g.take("estimator", [&](const json& x, const std::string& q) { parse_estimator(x, q, gc.estimator); });
    g.finish();
  });
  r.take("eddy_weights", [&](const json& v, const std::string& p) { c.eddy_weights = read_numbers(v, p); });
  r.take("pg_weights", [&](const json& v, const std::string& p) { c.pg_weights = read_numbers(v, p); });
  r.finish();
  c.validate();
  return c;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_sweep_config(doc);
}

nlohmann::json to_json(const SweepConfig& c) {
  const GuidanceConfig& g = c.run.guidance;
  json estimator;
  if (const auto* a = std::get_if<ApproximateEstimator>(&g.estimator)) {
    estimator = {{"kind", "approximate"}, {"epsilon", a->epsilon}, {"probes", a->probes}};
  } else {
    estimator = {{"kind", "exact"}};
  }
  return {
      {"seed", c.seed},
      {"batches", c.batches},
      {"steps", c.run.steps},
      {"particles", c.run.particles},
      {"dynamics", std::string(to_string(c.run.dynamics))},
      {"schedule", {{"beta_min", c.run.schedule.beta_min()},
                    {"beta_max", c.run.schedule.beta_max()}}},
      {"target", {{"modes", c.target.modes},
                  {"radius", c.target.radius},
                  {"variance", c.target.variance}}},
      {"guidance", {{"gamma", g.gamma},
                    {"stop_ratio", g.stop_ratio},
                    {"neighbor_mode", std::string(to_string(g.neighbor_mode))},
                    {"estimator", estimator}}},
      {"eddy_weights", c.eddy_weights},
      {"pg_weights", c.pg_weights},
  };
}

std::uint64_t reference_arm_seed(std::uint64_t seed) {
  return derive_seed(seed, {kReferenceLabel});
}

std::uint64_t guided_arm_seed(std::uint64_t seed) {
  return derive_seed(seed, {kGuidedLabel});
}

double ArmResult::coverage_mean() const {
  return coverage.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(coverage);
}

double ArmResult::coverage_se() const {
  const std::size_t n = coverage.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = mean_of(coverage);
  double ss = 0.0;
  for (int c : coverage) ss += (c - mean) * (c - mean);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

ArmResult run_arm(const SweepConfig& config, Method method, double weight,
                  std::uint64_t base_seed, int threads) {
  const GaussianMixture target = config.target.build();
  RunConfig run = config.run;
  run.method = method;
  run.guidance.weight = method == Method::iid ? 0.0 : weight;

  ArmResult arm;
  arm.method = method;
  arm.weight = run.guidance.weight;
  arm.base_seed = base_seed;
  arm.batches = sample_many(run, target, config.batches, base_seed, threads);
  arm.coverage.reserve(arm.batches.size());
  arm.distance.reserve(arm.batches.size());
  arm.angle.reserve(arm.batches.size());
  for (const ParticleBatch& b : arm.batches) {
    arm.coverage.push_back(mode_coverage(b.positions, target.centers()));
    const NearestMode nm = nearest_mode_stats(b.positions.front(), target.centers());
    arm.distance.push_back(nm.distance);
    arm.angle.push_back(nm.angle);
  }
  return arm;
}

std::vector<MarginalTest> marginal_tests(const ArmResult& arm,
                                         const ArmResult& reference) {
  std::vector<MarginalTest> out;
  const std::pair<const char*, std::pair<const std::vector<double>*, const std::vector<double>*>>
      metrics[] = {{"distance", {&arm.distance, &reference.distance}},
                   {"angle", {&arm.angle, &reference.angle}}};
  for (const auto& [name, samples] : metrics) {
    const std::span<const double> a(*samples.first);
    const std::span<const double> b(*samples.second);
    for (const TestResult& r : {ks_two_sample(a, b), mann_whitney(a, b), welch_t(a, b)}) {
      out.push_back({arm.method, arm.weight, name, r});
    }
  }
  return out;
}

SweepResult run_gmm_sweep(const SweepConfig& config, int threads) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  SweepResult result;
  result.config = config;
  result.expected_iid_coverage = expected_iid_coverage(config.target.modes, config.run.particles);
  result.reference = run_arm(config, Method::iid, 0.0, reference_arm_seed(config.seed), threads);
  const std::uint64_t guided = guided_arm_seed(config.seed);
  for (double w : config.eddy_weights) {
    result.arms.push_back(run_arm(config, Method::eddy, w, guided, threads));
  }
  for (double w : config.pg_weights) {
    result.arms.push_back(run_arm(config, Method::pg, w, guided, threads));
  }
  for (const ArmResult& arm : result.arms) {
    for (MarginalTest& t : marginal_tests(arm, result.reference)) {
      result.tests.push_back(std::move(t));
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

nlohmann::json sweep_report(const SweepResult& r) {
  auto arm_summary = [](const ArmResult& a) {
    return json{{"method", std::string(to_string(a.method))},
                {"w_g", a.weight},
                {"base_seed", a.base_seed},
                {"mean", a.coverage_mean()},
                {"se", a.coverage_se()},
                {"batches", a.coverage.size()}};
  };
  json curve = json::array();
  for (const ArmResult& a : r.arms) curve.push_back(arm_summary(a));
  json tests = json::array();
  for (const MarginalTest& t : r.tests) {
    tests.push_back({{"method", std::string(to_string(t.method))},
                     {"w_g", t.weight},
                     {"metric", t.metric},
                     {"test", std::string(to_string(t.result.test))},
                     {"statistic", t.result.statistic},
                     {"p_value", t.result.p_value},
                     {"n_a", t.result.sample_sizes.first},
                     {"n_b", t.result.sample_sizes.second}});
  }
  return {
      {"schema_version", kReportSchemaVersion},
      {"artifact_version", std::string(kArtifactVersion)},
      {"config", to_json(r.config)},
      {"seeds", {{"config", r.config.seed},
                 {"reference_arm", reference_arm_seed(r.config.seed)},
                 {"guided_arms", guided_arm_seed(r.config.seed)}}},
      {"marginal_sample", "particle 0 of each batch"},
      {"expected_iid_coverage", r.expected_iid_coverage},
      {"reference", arm_summary(r.reference)},
      {"coverage_curve", curve},
      {"tests", tests},
      {"timing", {{"wall_seconds", r.wall_seconds}}},
  };
}

std::map<std::string, std::string> render_sweep(const SweepResult& r) {
  std::map<std::string, std::string> files;
  files["report.json"] = dump_json(sweep_report(r));

  std::vector<const ArmResult*> all{&r.reference};
  for (const ArmResult& a : r.arms) all.push_back(&a);

  std::ostringstream coverage;
  coverage << "method,w_g_dimensionless,mean_coverage_modes,standard_error_modes,batches_count\n";
  for (const ArmResult* a : all) {
    coverage << to_string(a->method) << ',' << format_double(a->weight) << ','
             << format_double(a->coverage_mean()) << ',' << format_double(a->coverage_se())
             << ',' << a->coverage.size() << '\n';
  }
  files["coverage_vs_wg.csv"] = coverage.str();

  auto cdf = [&](const char* column, std::vector<double> ArmResult::*field) {
    std::ostringstream out;
    out << "method,w_g_dimensionless,rank_index," << column << ",ecdf_fraction\n";
    for (const ArmResult* a : all) {
      std::vector<double> sorted = a->*field;
      std::sort(sorted.begin(), sorted.end());
      const double n = static_cast<double>(sorted.size());
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        out << to_string(a->method) << ',' << format_double(a->weight) << ',' << k << ','
            << format_double(sorted[k]) << ',' << format_double((k + 1.0) / n) << '\n';
      }
    }
    return out.str();
  };
  files["cdf_distance.csv"] = cdf("distance_coord_units", &ArmResult::distance);
  files["cdf_angle.csv"] = cdf("angle_rad", &ArmResult::angle);

  std::ostringstream samples;
  samples << "method,w_g_dimensionless,batch_index,particle_index,x_coord_units,y_coord_units\n";
  for (const ArmResult* a : all) {
    for (std::size_t b = 0; b < a->batches.size(); ++b) {
      const auto& pos = a->batches[b].positions;
      for (std::size_t i = 0; i < pos.size(); ++i) {
        samples << to_string(a->method) << ',' << format_double(a->weight) << ',' << b
                << ',' << i;
        for (Eigen::Index k = 0; k < pos[i].size(); ++k) {
          samples << ',' << format_double(pos[i][k]);
        }
        samples << '\n';
      }
    }
  }
  files["samples.csv"] = samples.str();
  return files;
}

void write_outputs(const std::filesystem::path& dir,
                   const std::map<std::string, std::string>& files) {
  for (const auto& [name, contents] : files) write_text_file(dir / name, contents);
}

}  // namespace eddy
