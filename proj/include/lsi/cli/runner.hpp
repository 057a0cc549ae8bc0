#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsi/certify/scan.hpp"
#include "lsi/dynamics/simulate.hpp"
#include "lsi/errors.hpp"
#include "lsi/flow/evaluator.hpp"
#include "lsi/numerics/digest.hpp"
#include "lsi/numerics/rng.hpp"
#include "lsi/sine_gordon/model.hpp"
#include "lsi/sine_gordon/pipeline.hpp"
#include "lsi/validation/suites.hpp"

namespace lsi::cli {

using nlohmann::json;

constexpr int kSchemaVersion = 1;
constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitGate = 2;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"certify-glauber", "certify-kawasaki", "validate-identities",
                                              "scan-mu",         "simulate",         "reproduce-asymptotics",
                                              "reproduce"};
  return names;
}

inline bool is_certify(const std::string& c) { return c == "certify-glauber" || c == "certify-kawasaki"; }

inline json model_defaults() {
  return {{"beta", "4.5pi"}, {"z", 0.0}, {"mass", 1.0}, {"mesh", 1.0}, {"side", 8.0}, {"safety", 1.0}};
}

/// Every default lives here and is echoed into the manifest.
inline json defaults(const std::string& command) {
  json d;
  if (is_certify(command)) {
    d = model_defaults();
    d["grid_points"] = 128;
    d["horizon_factor"] = 40.0;
    d["allow_large_z"] = true;
  } else if (command == "validate-identities") {
    d = {{"suite", "all"}, {"seed", 6}, {"nodes", 20}, {"entropy_tolerance", 0.02}};
  } else if (command == "scan-mu") {
    d = model_defaults();
    d["beta"] = "3pi";
    d["z"] = 0.05;
    d["side"] = 2.0;
    d["grid_points"] = 12;
    d["horizon_factor"] = 10.0;
    d["nodes"] = 10;
    d["restarts"] = 4;
    d["sweeps"] = 20;
    d["seed"] = 1;
  } else if (command == "simulate") {
    d = model_defaults();
    d["dynamics"] = "glauber";
    d["dt"] = 0.0;
    d["horizon"] = 20.0;
    d["replicas"] = 64;
    d["seed"] = 1;
    d["record_every"] = 0;
    d["burn_in"] = 5.0;
    d["observables"] = json::array();
    d["initial"] = "zero";
    d["thin"] = 1;
  } else if (command == "reproduce-asymptotics") {
    d = model_defaults();
    d.erase("z");
    d.erase("beta");
    d["dynamics"] = "glauber";
    d["betas"] = {"3pi", "4.5pi", "5.5pi"};
    d["z_values"] = {1e-3, 1e-2, 1e-1};
    d["side"] = 16.0;
    d["grid_points"] = 128;
    d["horizon_factor"] = 40.0;
  } else if (command == "reproduce") {
    d = {{"manifest", ""}, {"seed", nullptr}};
  } else {
    throw std::invalid_argument("unknown command '" + command + "'");
  }
  return d;
}

/// defaults ← config document ← explicit flags; unknown keys are rejected.
inline json resolve_config(const std::string& command, const json& document, const json& flags) {
  json out = defaults(command);
  for (const json* layer : {&document, &flags}) {
    if (layer->is_null()) {
      continue;
    }
    if (!layer->is_object()) {
      throw std::invalid_argument("configuration must be a JSON object");
    }
    for (const auto& [key, value] : layer->items()) {
      if (key == "schema_version" || key == "command") {
        continue;
      }
      if (!out.contains(key)) {
        throw std::invalid_argument("unknown configuration key '" + key + "' for " + command);
      }
      out[key] = value;
    }
  }
  return out;
}

inline double beta_of(const json& v) {
  return v.is_string() ? sine_gordon::parse_beta(v.get<std::string>()) : v.get<double>();
}

inline sine_gordon::SineGordonParams params_from(const json& c, const json& beta) {
  sine_gordon::SineGordonParams p;
  p.beta = beta_of(beta);
  p.z = c.value("z", 0.0);
  p.mass = c.at("mass").get<double>();
  p.mesh = c.at("mesh").get<double>();
  p.side = c.at("side").get<double>();
  p.safety = c.at("safety").get<double>();
  return p;
}

inline sine_gordon::CertifyOptions certify_options(const json& c) {
  sine_gordon::CertifyOptions o;
  o.grid_points = c.at("grid_points").get<int>();
  o.horizon_factor = c.at("horizon_factor").get<double>();
  o.allow_large_z = c.value("allow_large_z", true);
  if (o.grid_points < 2 || !(o.horizon_factor > 0.0)) {
    throw std::invalid_argument("grid_points must be >= 2 and horizon_factor positive");
  }
  return o;
}

inline std::string config_fingerprint(const std::string& command, const json& config) {
  numerics::Digest d;
  d.update(command);
  d.update("\n");
  d.update(config.dump());
  return d.hex();
}

inline json versions() {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  std::ostringstream js;
  js << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
  return {{"lsi_cert", kToolVersion}, {"eigen", eigen.str()},     {"nlohmann_json", js.str()},
          {"cli11", CLI11_VERSION},   {"compiler", __VERSION__}, {"cxx_standard", static_cast<long>(__cplusplus)}};
}

struct Artifacts {
  std::map<std::string, std::string> files;
  json summary = json::object();
  bool flagged = false;
  std::optional<GateFailure> gate;  // raised after the artifacts are written
};

inline std::string number(double v) {
  if (!std::isfinite(v)) {
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  }
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline Artifacts run_certify(const std::string& command, const json& c) {
  const sine_gordon::SineGordonParams p = params_from(c, c.at("beta"));
  p.validate_for_certification();
  const sine_gordon::CertifyOptions o = certify_options(c);
  const sine_gordon::SineGordonCertificate cert =
      command == "certify-glauber" ? sine_gordon::certify_glauber(p, o) : sine_gordon::certify_kawasaki(p, o);
  Artifacts a;
  a.files["certificate.json"] = certify::to_json(cert.certificate).dump(2);
  a.files["report.json"] = cert.report.dump(2);
  std::ostringstream grid;
  grid << "t,mu_dot\n";
  for (std::size_t k = 0; k < cert.certificate.mu.size(); ++k) {
    grid << number(cert.certificate.mu.t[k]) << ',' << number(cert.certificate.mu.rate[k]) << '\n';
  }
  a.files["mu_grid.csv"] = grid.str();
  a.summary = {{"gamma_continuum", optional_number(cert.gamma_continuum)},
               {"log_gamma_continuum", cert.log_gamma_continuum},
               {"gamma_unit_lattice", optional_number(cert.gamma_unit)},
               {"certified", cert.certificate.certified},
               {"small_z", cert.small_z},
               {"t0", optional_number(cert.t0)}};
  a.flagged = !cert.certificate.certified;
  return a;
}

inline Artifacts run_validate(const json& c) {
  const std::string suite = c.at("suite").get<std::string>();
  if (suite != "semigroup" && suite != "heat-kernel" && suite != "entropy" && suite != "all") {
    throw std::invalid_argument("suite must be semigroup, heat-kernel, entropy or all");
  }
  std::vector<validation::SuiteReport> reports;
  if (suite == "semigroup" || suite == "all") {
    reports.push_back(validation::semigroup_suite(c.at("seed").get<std::uint64_t>(), c.at("nodes").get<int>()));
  }
  if (suite == "heat-kernel" || suite == "all") {
    reports.push_back(validation::heat_kernel_suite());
  }
  if (suite == "entropy" || suite == "all") {
    reports.push_back(validation::entropy_suite(c.at("entropy_tolerance").get<double>()));
  }
  Artifacts a;
  json all = json::array();
  std::ostringstream csv;
  csv << "suite,check,value,tolerance,pass\n";
  std::vector<std::string> failed;
  for (const auto& r : reports) {
    all.push_back(validation::to_json(r));
    for (const auto& ch : r.checks) {
      csv << r.suite << ',' << ch.name << ',' << number(ch.value) << ',' << number(ch.tolerance) << ','
          << (ch.pass ? 1 : 0) << '\n';
      if (!ch.pass) {
        failed.push_back(r.suite + "/" + ch.name);
      }
    }
    a.summary[r.suite] = r.all_pass();
  }
  a.files["report.json"] = json{{"suites", all}}.dump(2);
  a.files["checks.csv"] = csv.str();
  if (!failed.empty()) {
    std::string msg = "identity checks failed:";
    for (const auto& f : failed) {
      msg += " " + f;
    }
    a.gate = GateFailure("identity", msg);
  }
  return a;
}

inline Artifacts run_scan(const json& c) {
  const sine_gordon::SineGordonParams p = params_from(c, c.at("beta"));
  p.validate_for_certification();
  if (p.sites() > 4) {
    throw std::invalid_argument("scan-mu evaluates V_t by tensor quadrature and supports at most 4 sites");
  }
  const sine_gordon::SineGordonPipeline pipe(p, lattice::ScheduleMode::heat);
  const std::vector<double> grid = pipe.default_grid(c.at("grid_points").get<int>(),
                                                     c.at("horizon_factor").get<double>());
  const std::vector<sine_gordon::ScaleData> data = pipe.scan(grid);
  const flow::FlowEvaluator flow(sine_gordon::sg_model(p), pipe.schedule(),
                                 flow::Method::quadrature(c.at("nodes").get<int>()));
  const double period = 2.0 * std::numbers::pi / std::sqrt(p.beta);
  const int n = p.sites();
  const certify::PointSampler sampler = [n, period](numerics::CounterRng& rng) {
    std::uniform_real_distribution<double> u(0.0, period);
    flow::Vector phi(n);
    for (int i = 0; i < n; ++i) {
      phi(i) = u(rng);
    }
    return phi;
  };
  certify::ScanOptions opts;
  opts.restarts = c.at("restarts").get<int>();
  opts.max_sweeps = c.at("sweeps").get<int>();
  opts.seed = c.at("seed").get<std::uint64_t>();
  const certify::MuSchedule sampled = certify::mu_scan(flow, grid, sampler, opts);
  Artifacts a;
  std::ostringstream csv;
  csv << "t,mu_dot_sampled,mu_dot_certified,bound_holds\n";
  int violations = 0;
  json rows = json::array();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double bound = data[k].mu_dot;
    const bool holds = sampled.rate[k] >= bound - 1e-8 * (1.0 + std::abs(bound));
    violations += holds ? 0 : 1;
    csv << number(grid[k]) << ',' << number(sampled.rate[k]) << ',' << number(bound) << ',' << (holds ? 1 : 0)
        << '\n';
    rows.push_back({{"t", grid[k]}, {"sampled", sampled.rate[k]}, {"certified", bound}, {"holds", holds}});
  }
  a.files["mu_scan.csv"] = csv.str();
  a.files["report.json"] =
      json{{"params", sine_gordon::params_json(p)}, {"rows", rows}, {"violations", violations}}.dump(2);
  a.summary = {{"grid_points", grid.size()}, {"violations", violations}};
  a.flagged = violations > 0;
  return a;
}

inline dynamics::DynamicsRun dynamics_run(const json& c) {
  dynamics::DynamicsRun run;
  run.kind = dynamics::parse_dynamics(c.at("dynamics").get<std::string>());
  run.params = params_from(c, c.at("beta"));
  run.dt = c.at("dt").get<double>();
  run.horizon = c.at("horizon").get<double>();
  run.replicas = c.at("replicas").get<int>();
  run.seed = c.at("seed").get<std::uint64_t>();
  run.observables = c.at("observables").get<std::vector<std::string>>();
  const std::string init = c.at("initial").get<std::string>();
  if (init != "zero" && init != "gaussian") {
    throw std::invalid_argument("initial must be zero or gaussian");
  }
  run.initial = init == "zero" ? dynamics::InitialState::zero : dynamics::InitialState::gaussian;
  int every = c.at("record_every").get<int>();
  if (every <= 0) {
    // Default records roughly every 0.05 time units.
    every = std::max(1, static_cast<int>(std::lround(0.05 / run.step())));
  }
  run.record_every = every;
  return run;
}

inline Artifacts run_simulate(const json& c) {
  const dynamics::DynamicsRun run = dynamics_run(c);
  run.validate();
  const double burn_in = c.at("burn_in").get<double>();
  if (!(burn_in >= 0.0) || !(burn_in < run.horizon)) {
    throw std::invalid_argument("burn_in must lie in [0, horizon)");
  }
  const dynamics::Trajectories tr = dynamics::simulate(run);
  const dynamics::RelaxationReport rel = dynamics::estimate_relaxation(tr, burn_in);
  Artifacts a;
  a.files["series.csv"] = dynamics::series_csv(tr, c.at("thin").get<int>());
  json j = dynamics::to_json(rel);
  j["run"] = {{"dynamics", dynamics::to_string(run.kind)},
              {"params", sine_gordon::params_json(run.params)},
              {"dt", tr.dt},
              {"steps", tr.steps},
              {"record_every", tr.record_every},
              {"stiffest_rate", tr.stiffest},
              {"max_increment", tr.max_increment},
              {"max_conservation_drift", tr.max_conservation_drift}};
  a.files["relaxation.json"] = j.dump(2);
  a.summary = {{"slowest", dynamics::to_json(rel.slowest)}};
  for (const auto& e : rel.observables) {
    a.flagged = a.flagged || e.flagged;
  }
  return a;
}

inline Artifacts run_asymptotics(const json& c) {
  const std::string dyn = c.at("dynamics").get<std::string>();
  if (dyn != "glauber" && dyn != "kawasaki") {
    throw std::invalid_argument("dynamics must be glauber or kawasaki");
  }
  const sine_gordon::CertifyOptions o = certify_options(c);
  std::ostringstream csv;
  csv << "beta_over_pi,z,gamma,log_gamma,gamma_free,deficit_ratio,certified,small_z\n";
  json rows = json::array();
  Artifacts a;
  for (const auto& b : c.at("betas")) {
    for (const auto& zv : c.at("z_values")) {
      json pc = c;
      pc["z"] = zv;
      const sine_gordon::SineGordonParams p = params_from(pc, b);
      p.validate_for_certification();
      const sine_gordon::SineGordonCertificate cert =
          dyn == "glauber" ? sine_gordon::certify_glauber(p, o) : sine_gordon::certify_kawasaki(p, o);
      sine_gordon::SineGordonParams free = p;
      free.z = 0.0;
      const sine_gordon::SineGordonCertificate base =
          dyn == "glauber" ? sine_gordon::certify_glauber(free, o) : sine_gordon::certify_kawasaki(free, o);
      const double g = cert.gamma_continuum.value_or(0.0);
      const double g0 = base.gamma_continuum.value_or(0.0);
      const double ratio = (g0 - g) / std::abs(p.z);
      csv << number(p.beta / sine_gordon::kPi) << ',' << number(p.z) << ',' << number(g) << ','
          << number(cert.log_gamma_continuum) << ',' << number(g0) << ',' << number(ratio) << ','
          << (cert.certificate.certified ? 1 : 0) << ',' << (cert.small_z ? 1 : 0) << '\n';
      rows.push_back({{"beta_over_pi", p.beta / sine_gordon::kPi},
                      {"z", p.z},
                      {"gamma", g},
                      {"gamma_free", g0},
                      {"deficit_ratio", ratio},
                      {"certified", cert.certificate.certified}});
      a.flagged = a.flagged || !cert.certificate.certified;
    }
  }
  a.files["asymptotics.csv"] = csv.str();
  a.files["report.json"] = json{{"rows", rows}}.dump(2);
  a.summary = {{"rows", rows.size()}};
  return a;
}

inline Artifacts execute(const std::string& command, const json& config);

/// Re-executes the run recorded in a manifest in memory. Deterministic outputs must
/// match byte for byte; a simulate run with a new seed must give rates inside mutual CIs.
inline Artifacts run_reproduce(const json& c) {
  const std::string path = c.at("manifest").get<std::string>();
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot read manifest " + path);
  }
  const json manifest = json::parse(in);
  const std::string command = manifest.at("command").get<std::string>();
  json config = manifest.at("config");
  const bool reseeded = !c.at("seed").is_null() && config.contains("seed") && config["seed"] != c.at("seed");
  if (reseeded) {
    config["seed"] = c.at("seed");
  }
  const Artifacts again = execute(command, config);
  json report{{"manifest", path}, {"command", command}, {"reseeded", reseeded}};
  json diffs = json::array();
  bool ok = true;
  if (!reseeded) {
    report["mode"] = "bit_identical";
    for (const auto& [name, entry] : manifest.at("outputs").items()) {
      const auto it = again.files.find(name);
      if (it == again.files.end()) {
        diffs.push_back({{"file", name}, {"issue", "not produced"}});
        ok = false;
        continue;
      }
      const std::string digest = numerics::digest_of(it->second);
      if (digest != entry.at("digest").get<std::string>()) {
        json d{{"file", name}, {"expected", entry.at("digest")}, {"actual", digest}};
        const std::filesystem::path original = std::filesystem::path(path).parent_path() / name;
        std::ifstream f(original);
        if (f) {
          std::string line;
          std::istringstream fresh(it->second);
          std::string other;
          long number_of_line = 0;
          while (true) {
            ++number_of_line;
            const bool a1 = static_cast<bool>(std::getline(f, line));
            const bool a2 = static_cast<bool>(std::getline(fresh, other));
            if (!a1 && !a2) {
              break;
            }
            if (!a1 || !a2 || line != other) {
              d["first_difference"] = {{"line", number_of_line}, {"expected", line}, {"actual", other}};
              break;
            }
          }
        }
        diffs.push_back(d);
        ok = false;
      }
    }
  } else {
    report["mode"] = "statistical";
    if (command != "simulate") {
      throw std::invalid_argument("a new seed only applies to simulate manifests");
    }
    const std::filesystem::path original = std::filesystem::path(path).parent_path() / "relaxation.json";
    std::ifstream f(original);
    if (!f) {
      throw std::invalid_argument("cannot read " + original.string());
    }
    const json before = json::parse(f);
    const json after = json::parse(again.files.at("relaxation.json"));
    json rows = json::array();
    for (const auto& e1 : before.at("observables")) {
      for (const auto& e2 : after.at("observables")) {
        if (e1.at("observable") != e2.at("observable")) {
          continue;
        }
        const double r1 = e1.at("rate").get<double>();
        const double r2 = e2.at("rate").get<double>();
        const double h1 = 0.5 * (e1.at("ci")[1].get<double>() - e1.at("ci")[0].get<double>());
        const double h2 = 0.5 * (e2.at("ci")[1].get<double>() - e2.at("ci")[0].get<double>());
        const bool compatible = std::abs(r1 - r2) <= h1 + h2;
        rows.push_back({{"observable", e1.at("observable")},
                        {"rate_original", r1},
                        {"rate_rerun", r2},
                        {"half_widths", {h1, h2}},
                        {"compatible", compatible}});
        if (!compatible) {
          diffs.push_back(rows.back());
          ok = false;
        }
      }
    }
    report["rates"] = rows;
  }
  report["differences"] = diffs;
  report["status"] = ok ? "verified" : "mismatch";
  Artifacts a;
  a.files["reproduce.json"] = report.dump(2);
  a.summary = {{"status", report["status"]}, {"mode", report["mode"]}, {"differences", diffs.size()}};
  if (!ok) {
    a.gate = GateFailure("reproduction_mismatch", "re-execution does not reproduce " + path);
  }
  return a;
}

inline Artifacts execute(const std::string& command, const json& config) {
  if (is_certify(command)) {
    return run_certify(command, config);
  }
  if (command == "validate-identities") {
    return run_validate(config);
  }
  if (command == "scan-mu") {
    return run_scan(config);
  }
  if (command == "simulate") {
    return run_simulate(config);
  }
  if (command == "reproduce-asymptotics") {
    return run_asymptotics(config);
  }
  if (command == "reproduce") {
    return run_reproduce(config);
  }
  throw std::invalid_argument("unknown command '" + command + "'");
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Written {
  std::filesystem::path dir;
  bool existing = false;
};

/// Writes artifacts into root/<fingerprint>/ through a staging directory and a rename.
/// An existing directory is never modified; it must hold the same outputs.
inline Written write_artifacts(const std::filesystem::path& root, const std::string& command, const json& config,
                               const Artifacts& a, double wall_seconds) {
  namespace fs = std::filesystem;
  const std::string fp = config_fingerprint(command, config);
  Written w{root / fp, false};
  json outputs = json::object();
  for (const auto& [name, content] : a.files) {
    outputs[name] = {{"digest", numerics::digest_of(content)}, {"bytes", content.size()}};
  }
  if (fs::exists(w.dir)) {
    const fs::path mpath = w.dir / "manifest.json";
    if (!fs::exists(mpath)) {
      throw std::runtime_error(w.dir.string() + " exists without a manifest");
    }
    const json prior = json::parse(read_file(mpath));
    if (prior.at("outputs") != outputs) {
      throw std::runtime_error(w.dir.string() + " holds different outputs for the same configuration");
    }
    w.existing = true;
    return w;
  }
  fs::create_directories(root);
  const fs::path stage = root / ("." + fp + ".staging." + std::to_string(::getpid()));
  fs::remove_all(stage);
  fs::create_directories(stage);
  for (const auto& [name, content] : a.files) {
    std::ofstream out(stage / name, std::ios::binary);
    out << content;
    if (!out) {
      throw std::runtime_error("cannot write " + (stage / name).string());
    }
  }
  const json manifest{{"schema_version", kSchemaVersion},
                      {"command", command},
                      {"config", config},
                      {"versions", versions()},
                      {"fingerprint", fp},
                      {"outputs", outputs},
                      {"wall_time_seconds", wall_seconds}};
  std::ofstream(stage / "manifest.json") << manifest.dump(2) << '\n';
  fs::rename(stage, w.dir);
  return w;
}

inline json error_record(const std::string& kind, const std::string& category, const std::string& message,
                         const std::string& command) {
  return {{"status", "error"}, {"class", category}, {"kind", kind}, {"message", message}, {"command", command}};
}

struct FlagSpec {
  std::string flag;
  std::string key;
  enum Kind { real, integer, text, texts, reals, on, off } kind;
  std::string help;
};

inline std::vector<FlagSpec> flag_specs(const std::string& command) {
  std::vector<FlagSpec> out;
  const std::vector<FlagSpec> model{{"--beta", "beta", FlagSpec::text, "coupling, e.g. 4.5pi"},
                                    {"--z", "z", FlagSpec::real, "activity z"},
                                    {"--mass", "mass", FlagSpec::real, "mass m"},
                                    {"--mesh", "mesh", FlagSpec::real, "lattice spacing eps"},
                                    {"--side", "side", FlagSpec::real, "physical side L"},
                                    {"--safety", "safety", FlagSpec::real, "series radius safety factor"}};
  if (is_certify(command)) {
    out = model;
    out.push_back({"--grid-points", "grid_points", FlagSpec::integer, "scale grid size"});
    out.push_back({"--horizon-factor", "horizon_factor", FlagSpec::real, "grid horizon in units of 1/lambda"});
    out.push_back({"--no-large-z", "allow_large_z", FlagSpec::off, "disable the large-z split"});
  } else if (command == "validate-identities") {
    out = {{"--suite", "suite", FlagSpec::text, "semigroup | heat-kernel | entropy | all"},
           {"--seed", "seed", FlagSpec::integer, "probe seed"},
           {"--nodes", "nodes", FlagSpec::integer, "quadrature nodes per dimension"},
           {"--entropy-tolerance", "entropy_tolerance", FlagSpec::real, "relative tolerance"}};
  } else if (command == "scan-mu") {
    out = model;
    out.push_back({"--grid-points", "grid_points", FlagSpec::integer, "scale grid size"});
    out.push_back({"--horizon-factor", "horizon_factor", FlagSpec::real, "grid horizon in units of 1/lambda"});
    out.push_back({"--nodes", "nodes", FlagSpec::integer, "quadrature nodes per dimension"});
    out.push_back({"--restarts", "restarts", FlagSpec::integer, "random starts per scale"});
    out.push_back({"--sweeps", "sweeps", FlagSpec::integer, "descent sweeps per start"});
    out.push_back({"--seed", "seed", FlagSpec::integer, "scan seed"});
  } else if (command == "simulate") {
    out = model;
    out.push_back({"--dynamics", "dynamics", FlagSpec::text, "glauber | kawasaki"});
    out.push_back({"--dt", "dt", FlagSpec::real, "time step (0 selects the default)"});
    out.push_back({"--horizon", "horizon", FlagSpec::real, "simulated time"});
    out.push_back({"--replicas", "replicas", FlagSpec::integer, "independent replicas"});
    out.push_back({"--seed", "seed", FlagSpec::integer, "noise seed"});
    out.push_back({"--record-every", "record_every", FlagSpec::integer, "steps between records (0 = auto)"});
    out.push_back({"--burn-in", "burn_in", FlagSpec::real, "discarded initial time"});
    out.push_back({"--observables", "observables", FlagSpec::texts, "observable names"});
    out.push_back({"--initial", "initial", FlagSpec::text, "zero | gaussian"});
    out.push_back({"--thin", "thin", FlagSpec::integer, "CSV thinning"});
  } else if (command == "reproduce-asymptotics") {
    out = {{"--dynamics", "dynamics", FlagSpec::text, "glauber | kawasaki"},
           {"--betas", "betas", FlagSpec::texts, "couplings"},
           {"--z-values", "z_values", FlagSpec::reals, "activities"},
           {"--mass", "mass", FlagSpec::real, "mass m"},
           {"--mesh", "mesh", FlagSpec::real, "lattice spacing eps"},
           {"--side", "side", FlagSpec::real, "physical side L"},
           {"--safety", "safety", FlagSpec::real, "series radius safety factor"},
           {"--grid-points", "grid_points", FlagSpec::integer, "scale grid size"},
           {"--horizon-factor", "horizon_factor", FlagSpec::real, "grid horizon in units of 1/lambda"}};
  } else if (command == "reproduce") {
    out = {{"--manifest", "manifest", FlagSpec::text, "manifest.json of a prior run"},
           {"--seed", "seed", FlagSpec::integer, "new seed for a statistical rerun"}};
  }
  return out;
}

inline void register_flags(CLI::App& sub, const std::string& command, json& flags) {
  for (const FlagSpec& f : flag_specs(command)) {
    const std::string key = f.key;
    switch (f.kind) {
      case FlagSpec::real:
        sub.add_option_function<double>(f.flag, [&flags, key](double v) { flags[key] = v; }, f.help);
        break;
      case FlagSpec::integer:
        sub.add_option_function<long long>(f.flag, [&flags, key](long long v) { flags[key] = v; }, f.help);
        break;
      case FlagSpec::text:
        sub.add_option_function<std::string>(f.flag, [&flags, key](const std::string& v) { flags[key] = v; },
                                             f.help);
        break;
      case FlagSpec::texts:
        sub.add_option_function<std::vector<std::string>>(
            f.flag, [&flags, key](const std::vector<std::string>& v) { flags[key] = v; }, f.help);
        break;
      case FlagSpec::reals:
        sub.add_option_function<std::vector<double>>(
            f.flag, [&flags, key](const std::vector<double>& v) { flags[key] = v; }, f.help);
        break;
      case FlagSpec::on:
      case FlagSpec::off: {
        const bool value = f.kind == FlagSpec::on;
        sub.add_flag_callback(f.flag, [&flags, key, value]() { flags[key] = value; }, f.help);
        break;
      }
    }
  }
}

/// Full command-line entry point; returns the process exit code.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multiscale log-Sobolev certification for lattice sine-Gordon"};
  app.require_subcommand(1);
  std::map<std::string, json> flags;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::string> out_roots;
  for (const std::string& c : commands()) {
    flags[c] = json::object();
    out_roots[c] = "out";
  }
  for (const std::string& c : commands()) {
    CLI::App* sub = app.add_subcommand(c);
    register_flags(*sub, c, flags[c]);
    sub->add_option("--config", config_paths[c], "JSON configuration document");
    sub->add_option("--out", out_roots[c], "output root; artifacts go to <out>/<fingerprint>/");
  }
  std::string command = "unknown";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << error_record("usage", "error", e.what(), command).dump() << '\n';
    return kExitError;
  }
  command = app.get_subcommands().front()->get_name();
  try {
    json document;
    if (!config_paths[command].empty()) {
      std::ifstream in(config_paths[command]);
      if (!in) {
        throw std::invalid_argument("cannot read config " + config_paths[command]);
      }
      document = json::parse(in);
    }
    json config = resolve_config(command, document, flags[command]);
    std::filesystem::path root = out_roots[command];
    if (command == "reproduce") {
      if (config.at("manifest").get<std::string>().empty()) {
        throw std::invalid_argument("reproduce needs --manifest");
      }
      const std::filesystem::path m = std::filesystem::absolute(config.at("manifest").get<std::string>());
      config["manifest"] = m.lexically_normal().string();
      if (out_roots[command] == "out") {
        root = m.parent_path().parent_path();
      }
    }
    const auto start = std::chrono::steady_clock::now();
    const Artifacts a = execute(command, config);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Written w = write_artifacts(root, command, config, a, wall);
    json summary{{"status", a.gate ? "gate_failure" : (a.flagged ? "flagged" : "ok")},
                 {"command", command},
                 {"fingerprint", config_fingerprint(command, config)},
                 {"out_dir", w.dir.string()},
                 {"existing", w.existing},
                 {"results", a.summary}};
    out << summary.dump(2) << '\n';
    if (a.gate) {
      err << error_record(a.gate->kind(), "gate", a.gate->what(), command).dump() << '\n';
      return kExitGate;
    }
    return kExitOk;
  } catch (const GateFailure& e) {
    err << error_record(e.kind(), "gate", e.what(), command).dump() << '\n';
    return kExitGate;
  } catch (const std::exception& e) {
    err << error_record("error", "error", e.what(), command).dump() << '\n';
    return kExitError;
  }
}

}  // namespace lsi::cli
