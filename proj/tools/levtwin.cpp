// levtwin: command-line driver for runs, sweeps, reports, calibration scans
// and quantum-limit estimates.
//
//   levtwin run       --config cfg.yaml [--out DIR] [--seed-override N]
//   levtwin sweep     --config cfg.yaml [--out DIR] [--workers N]
//   levtwin report    DIR [--format json]
//   levtwin calibrate --config cfg.yaml [--out DIR] [--format csv|json]
//   levtwin limits    --config cfg.yaml [--format csv|json]
//
// Exit status: 0 ok, 1 config error, 2 runtime failure, 3 failed check.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "levtwin/common.hpp"
#include "levtwin/config.hpp"
#include "levtwin/io.hpp"
#include "levtwin/pipeline.hpp"

using namespace levtwin;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kCheck = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
};

ExperimentConfig load(const Common& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.sim.seed = *o.seed;
  if (!o.out.empty()) cfg.output.directory = o.out;
  return cfg;
}

// Flat "key,value" rows for scalar JSON objects.
std::string flat_csv(const json& j, const std::string& prefix = "") {
  std::ostringstream o;
  if (prefix.empty()) o << "key,value\n";
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      std::string sub = flat_csv(*it, key);
      o << sub;
    } else if (it->is_string()) {
      o << key << ',' << it->get<std::string>() << '\n';
    } else {
      o << key << ',' << it->dump() << '\n';
    }
  }
  return o.str();
}

void emit(const json& j, const std::string& format) {
  if (format == "csv") std::cout << flat_csv(j);
  else std::cout << j.dump(2) << '\n';
}

int cmd_run(const Common& o) {
  const ExperimentConfig cfg = load(o);
  const RunResult r = run_experiment(cfg);
  const fs::path dir = cfg.output.directory;
  write_run(r, cfg, dir);
  bool ok = true;
  for (Axis a : kAxes) {
    const auto& ax = r.axes[a];
    std::printf("%s  f=%.6g Hz  eta=%.4g  phi=%.4g rad  T_eq=%.5g K", std::string(axis_name(a)).c_str(),
                ax.omega / 6.283185307179586, ax.eta, ax.phase, ax.t_equipartition);
    if (ax.t_linewidth) std::printf("  T_lw=%.5g K", ax.t_linewidth->temperature);
    std::printf("\n");
  }
  for (const auto& ck : r.checks()) {
    ok = ok && ck.passed;
    if (!ck.passed) std::fprintf(stderr, "check failed: %s %s\n", ck.name.c_str(), ck.detail.c_str());
  }
  std::printf("wrote %s (digest %s)\n", dir.string().c_str(), r.digest.c_str());
  return ok ? kOk : kCheck;
}

int cmd_sweep(const Common& o, unsigned workers) {
  const ExperimentConfig cfg = load(o);
  if (!cfg.sweep) throw ConfigError("sweep", "missing sweep section");
  const fs::path dir = cfg.output.directory;
  const SweepOutcome s = run_sweep(cfg, dir, workers);
  std::printf("%zu points, %zu rows, %zu failed; wrote %s\n", cfg.sweep->values.size(), s.rows.size(),
              s.failures, (dir / "sweep.csv").string().c_str());
  if (o.format == "json") std::cout << s.summary.dump(2) << '\n';
  return s.failures ? kRuntime : kOk;
}

int cmd_report(const std::string& dir, const std::string& format) {
  const Report rep = build_report(dir);
  if (format == "json") {
    json j = {{"directory", dir}, {"empty", rep.empty}, {"checks_passed", rep.checks_passed},
              {"missing", rep.missing}, {"text", rep.text}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << rep.text;
  }
  if (rep.empty) return kOk;
  if (!rep.missing.empty()) return kRuntime;
  return rep.checks_passed ? kOk : kCheck;
}

int cmd_calibrate(const Common& o) {
  const ExperimentConfig cfg = load(o);
  const CalibrationOutcome c = run_calibration(cfg);
  json j = to_json(c.calibration);
  j["z0_configured_m"] = c.z0_true;
  j["mass_configured_kg"] = c.mass_true;
  j["omega_rad_s"] = c.omega;
  j["config_digest"] = cfg.digest();
  if (!o.out.empty()) {
    std::ostringstream scan;
    scan << "# config_digest=" << cfg.digest() << "\nwavelength_m,first_v,second_v\n";
    for (std::size_t i = 0; i < c.scan.wavelength.size(); ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", c.scan.wavelength[i], c.scan.first[i],
                    c.scan.second[i]);
      scan << line;
    }
    const fs::path dir = o.out;
    atomic_write(dir / "scan.csv", scan.str());
    atomic_write(dir / "calibration.json", j.dump(2) + "\n");
  }
  emit(j, o.format);
  return c.calibration.resolved ? kOk : kCheck;
}

int cmd_limits(const Common& o) {
  const ExperimentConfig cfg = load(o);
  json j = to_json(run_limits(cfg));
  j["axis"] = std::string(axis_name(cfg.limits.axis));
  j["config_digest"] = cfg.digest();
  if (!o.out.empty()) atomic_write(fs::path(o.out) / "limits.json", j.dump(2) + "\n");
  emit(j, o.format);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"levitated-nanoparticle feedback twin"};
  app.require_subcommand(1);
  Common o;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::string report_dir;

  auto add_common = [&](CLI::App* sub, bool with_format) {
    sub->add_option("--config", o.config, "YAML experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed-override", o.seed, "replace simulation.seed");
    if (with_format)
      sub->add_option("--format", o.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
  };
  auto* run = app.add_subcommand("run", "simulate and analyse one configuration");
  add_common(run, false);
  auto* sweep = app.add_subcommand("sweep", "run the configured parameter sweep");
  add_common(sweep, true);
  sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "summarise a run or sweep directory");
  report->add_option("dir", report_dir, "run or sweep directory")->required();
  o.format = "json";
  std::string report_format = "text";
  report->add_option("--format", report_format)->check(CLI::IsMember({"text", "json"}));
  auto* calibrate = app.add_subcommand("calibrate", "synthetic wavelength-scan calibration");
  add_common(calibrate, true);
  auto* limits = app.add_subcommand("limits", "quantum-limit metrics");
  add_common(limits, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o, workers);
    if (*report) return cmd_report(report_dir, report_format);
    if (*calibrate) return cmd_calibrate(o);
    if (*limits) return cmd_limits(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
