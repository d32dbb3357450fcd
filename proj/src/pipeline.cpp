#include "levtwin/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "levtwin/constants.hpp"
#include "levtwin/detector.hpp"
#include "levtwin/io.hpp"

namespace levtwin {

namespace c = constants;
using nlohmann::json;

namespace {

constexpr std::uint64_t kVoltageSeedOffset = 1000003;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Fit window for one axis in the shared detector spectrum: wide enough for
// the peak, narrow enough to exclude the other two axes.
FitBand voltage_band(const Axis3<double>& w, std::size_t i) {
  double half = 0.1 * w[i];
  for (std::size_t j = 0; j < 3; ++j) {
    if (j == i) continue;
    const double sep = std::abs(w[j] - w[i]);
    if (sep > 0.01 * w[i]) half = std::min(half, 0.45 * sep);
  }
  return {w[i] - half, w[i] + half, 0.0};
}

json check_json(const std::vector<Check>& checks) {
  json a = json::array();
  for (const auto& ck : checks) a.push_back({{"name", ck.name}, {"passed", ck.passed}, {"detail", ck.detail}});
  return a;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  RunResult r;
  r.digest = cfg.digest();
  r.seed = cfg.sim.seed;
  r.mode = cfg.sim.feedback_mode;
  r.model = motion_model(cfg);
  r.gamma_model = conversion_factor(cfg.trap, cfg.detector);
  const auto w = r.model.angular_frequencies();

  std::optional<IdealForceController> ideal;
  std::optional<FullLoopController> loop;
  FeedbackHook* hook = nullptr;
  if (r.mode == FeedbackMode::ideal_force) {
    ideal.emplace(cfg.feedback);
    hook = &*ideal;
  } else if (r.mode == FeedbackMode::full_loop) {
    loop.emplace(cfg.feedback, cfg.trap, cfg.detector, cfg.output.telemetry_stride);
    hook = &*loop;
  }
  r.trace = simulate(r.model, cfg.sim, hook);
  r.trace.config_digest = r.digest;
  if (loop) {
    r.saturations = loop->saturation_count();
    r.steps = loop->steps();
    for (std::size_t i = 0; i < 3; ++i) r.locked[i] = loop->pll()[i].locked;
    r.locked_fraction = loop->locked_fraction();
    if (cfg.output.telemetry_stride > 0) r.telemetry = loop->telemetry();
  }

  WelchConfig wc;
  wc.segment_length = cfg.analysis.segment_length;
  FitBand band;
  band.half_widths = cfg.analysis.fit_half_widths;
  const double t0 = cfg.gas.temperature;
  for (std::size_t i = 0; i < 3; ++i) {
    auto& ax = r.axes[i];
    ax.omega = w[i];
    ax.eta = r.mode == FeedbackMode::none ? 0.0 : cfg.feedback.eta[i];
    ax.phase = cfg.feedback.phase[i];
    ax.t_equipartition = equipartition_temperature(r.trace.position[i], r.model.mass, w[i]);
    try {
      r.spectra[i] = welch_psd(r.trace, static_cast<Axis>(i), wc);
      ax.fit = fit_lorentzian(r.spectra[i], band);
      ax.t_linewidth = extract_temperature(*ax.fit, r.model.damping, 0.0, t0);
      if (r.mode == FeedbackMode::none)
        ax.reference = extract_reference_params(*ax.fit, cfg.gas, t0, cfg.particle.density, 0.0);
    } catch (const std::exception& e) {
      ax.error = e.what();
    }
  }

  if (opts.analyse_voltage) {
    r.voltage = interference_signal(r.trace, cfg.trap, cfg.detector, cfg.sim.seed + kVoltageSeedOffset);
    r.voltage_spectrum = welch_psd(*r.voltage, Axis::z, wc);
    for (std::size_t i = 0; i < 3; ++i) {
      auto& ax = r.axes[i];
      try {
        ax.voltage_fit = fit_lorentzian(*r.voltage_spectrum, voltage_band(w, i));
        if (r.mode == FeedbackMode::none && i == 2)
          ax.reference = extract_reference_params(*ax.voltage_fit, cfg.gas, t0,
                                                  cfg.particle.density, cfg.detector.nep_det);
      } catch (const std::exception& e) {
        if (!ax.error.empty()) ax.error += "; ";
        ax.error += std::string("voltage fit: ") + e.what();
      }
    }
    if (!opts.keep_trace) r.voltage.reset();
  }

  QuantumInputs q;
  q.particle = cfg.particle;
  q.trap = cfg.trap;
  q.detector = cfg.detector;
  q.omega0 = w.z();
  q.temperature = r.axes.z().t_equipartition;
  q.level = cfg.limits.level;
  q.extra_damping = r.mode == FeedbackMode::none ? 0.0 : cfg.feedback.eta.z() * w.z() / 2.0;
  r.limits = quantum_limits(q);

  if (!opts.keep_trace) r.trace = TimeTrace{r.trace.dt, r.trace.unit, r.trace.seed, r.digest, {}, {}};
  return r;
}

std::vector<Check> RunResult::checks() const {
  std::vector<Check> out;
  for (Axis a : kAxes) {
    const auto& ax = axes[a];
    const std::string n(axis_name(a));
    Check fit{"fit_converged_" + n, ax.fit && ax.fit->converged, ax.error};
    out.push_back(fit);
    if (ax.fit && ax.t_linewidth) {
      const double rel = std::abs(ax.t_linewidth->temperature - ax.t_equipartition) / ax.t_equipartition;
      out.push_back({"temperature_consistency_" + n, rel < 0.15,
                     "linewidth vs equipartition differ by " + short_num(100 * rel) + "%"});
    }
    if (mode == FeedbackMode::full_loop && ax.eta > 0.0)
      // Thermal fades unlock a loop briefly; the check asks for lock most of the time.
      out.push_back({"pll_locked_" + n, locked_fraction[a] >= 0.5,
                     "locked " + short_num(100 * locked_fraction[a]) + "% of the run"});
  }
  if (mode == FeedbackMode::full_loop) {
    const double frac = steps ? static_cast<double>(saturations) / static_cast<double>(steps) : 0.0;
    out.push_back({"clamp_saturation", frac < 0.01, short_num(100 * frac) + "% of steps clamped"});
  }
  return out;
}

json RunResult::summary() const {
  json j;
  j["config_digest"] = digest;
  j["seed"] = seed;
  j["feedback_mode"] = feedback_mode_name(mode);
  j["mass_kg"] = model.mass;
  j["damping_per_s"] = model.damping;
  j["bath_temperature_k"] = model.temperature;
  j["gamma_model_v_m"] = gamma_model;
  j["sample_interval_s"] = trace.dt;
  j["samples"] = trace.size();
  json axes_j = json::object();
  for (Axis a : kAxes) {
    const auto& ax = axes[a];
    json e;
    e["omega_rad_s"] = ax.omega;
    e["frequency_hz"] = ax.omega / (2.0 * c::pi);
    e["eta"] = ax.eta;
    e["phase_rad"] = ax.phase;
    e["t_equipartition_k"] = ax.t_equipartition;
    e["t_linewidth_k"] = ax.t_linewidth ? json(ax.t_linewidth->temperature) : json(nullptr);
    e["t_linewidth_sigma_k"] = ax.t_linewidth ? json(ax.t_linewidth->sigma) : json(nullptr);
    e["fit"] = ax.fit ? to_json(*ax.fit) : json(nullptr);
    e["voltage_fit"] = ax.voltage_fit ? to_json(*ax.voltage_fit) : json(nullptr);
    if (ax.reference) {
      e["reference"] = {{"radius_m", optional_number(ax.reference->radius)},
                        {"mass_kg", optional_number(ax.reference->mass)},
                        {"gamma_v_m", optional_number(ax.reference->gamma)},
                        {"resolution_m_rthz", optional_number(ax.reference->resolution)},
                        {"note", ax.reference->note}};
    }
    e["error"] = ax.error;
    axes_j[std::string(axis_name(a))] = e;
  }
  j["axes"] = axes_j;
  if (mode == FeedbackMode::full_loop) {
    j["controller"] = {{"saturations", saturations},
                       {"steps", steps},
                       {"locked", {locked.x(), locked.y(), locked.z()}},
                       {"locked_fraction", {locked_fraction.x(), locked_fraction.y(), locked_fraction.z()}}};
  }
  j["limits"] = to_json(limits);
  j["checks"] = check_json(checks());
  return j;
}

void write_run(const RunResult& r, const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  if (r.trace.size() > 0) {
    write_trace_binary(dir / "trace.bin", r.trace);
    if (cfg.output.trace_csv) write_trace_csv(dir / "trace.csv", r.trace);
  }
  if (r.voltage) write_trace_binary(dir / "voltage.bin", *r.voltage);
  for (Axis a : kAxes)
    if (r.spectra[a].size() > 0)
      atomic_write(dir / ("spectrum_" + std::string(axis_name(a)) + ".csv"), spectrum_csv(r.spectra[a]));
  if (r.voltage_spectrum) atomic_write(dir / "spectrum_voltage.csv", spectrum_csv(*r.voltage_spectrum));
  json fits = json::object();
  fits["config_digest"] = r.digest;
  for (Axis a : kAxes) {
    const auto& ax = r.axes[a];
    fits[std::string(axis_name(a))] = {
        {"position", ax.fit ? to_json(*ax.fit) : json(nullptr)},
        {"voltage", ax.voltage_fit ? to_json(*ax.voltage_fit) : json(nullptr)}};
  }
  atomic_write(dir / "fits.json", fits.dump(2) + "\n");
  if (r.telemetry) atomic_write(dir / "telemetry.csv", telemetry_csv(*r.telemetry));
  atomic_write(dir / "config.canonical", cfg.canonical());
  atomic_write(dir / "summary.json", r.summary().dump(2) + "\n");
}

// ---------------------------------------------------------------- sweeps

namespace {

ExperimentConfig point_config(const ExperimentConfig& base, std::size_t i) {
  ExperimentConfig cfg = base;
  const auto& sw = *base.sweep;
  const double v = sw.values[i];
  auto set_axes = [&](Axis3<double>& target) {
    if (sw.axis) target[*sw.axis] = v;
    else target = Axis3<double>::uniform(v);
  };
  switch (sw.variable) {
    case SweepVariable::pressure: cfg.gas.pressure = v; break;
    case SweepVariable::eta: set_axes(cfg.feedback.eta); break;
    case SweepVariable::phi: set_axes(cfg.feedback.phase); break;
    case SweepVariable::wavelength: cfg.trap.wavelength = v; break;
  }
  cfg.sim.seed = base.sim.seed + i;
  cfg.sweep.reset();
  return cfg;
}

std::vector<SweepRow> simulate_point(const ExperimentConfig& base, std::size_t i,
                                     const fs::path& dir) {
  const ExperimentConfig cfg = point_config(base, i);
  const double v = base.sweep->values[i];
  std::vector<SweepRow> rows;
  char name[32];
  std::snprintf(name, sizeof name, "point_%04zu", i);
  const fs::path pdir = dir / name;

  if (base.sweep->variable == SweepVariable::wavelength) {
    const MotionModel m = motion_model(base);
    const double wz = m.angular_frequencies().z();
    const double z0 = base.scan.amplitude.value_or(
        std::sqrt(c::boltzmann * base.gas.temperature / m.stiffness.z()));
    ScanSynthesis syn{base.scan.cycles, base.scan.samples_per_cycle, cfg.sim.seed, true};
    TrapSpec trap = base.trap;
    const double lam[] = {v};
    const auto scan = synthesize_wavelength_scan(trap, base.detector, z0, wz, lam, syn);
    SweepRow row;
    row.point = i;
    row.value = v;
    row.axis = "z";
    row.omega = wz;
    row.damping = m.damping;
    row.t0 = base.gas.temperature;
    row.a1 = scan.first[0];
    row.a2 = scan.second[0];
    row.t_equipartition = row.t_linewidth = row.B = row.C = row.Q = nan();
    rows.push_back(row);
    json j = {{"config_digest", cfg.digest()}, {"wavelength_m", v}, {"a1_v", row.a1}, {"a2_v", row.a2}};
    atomic_write(pdir / "summary.json", j.dump(2) + "\n");
    return rows;
  }

  RunOptions opts;
  opts.analyse_voltage = false;
  opts.keep_trace = false;
  const RunResult r = run_experiment(cfg, opts);
  for (Axis a : kAxes) {
    const auto& ax = r.axes[a];
    SweepRow row;
    row.point = i;
    row.value = v;
    row.axis = std::string(axis_name(a));
    row.omega = ax.omega;
    row.damping = r.model.damping;
    row.t0 = r.model.temperature;
    row.eta = ax.eta;
    row.phase = ax.phase;
    row.t_equipartition = ax.t_equipartition;
    row.t_linewidth = ax.t_linewidth ? ax.t_linewidth->temperature : nan();
    row.B = ax.fit ? ax.fit->B : nan();
    row.C = ax.fit ? ax.fit->C : nan();
    row.Q = ax.fit ? ax.fit->B / ax.fit->C : nan();
    row.a1 = row.a2 = nan();
    if (!ax.error.empty()) {
      row.status = "partial";
      row.error = ax.error;
    }
    rows.push_back(row);
  }
  atomic_write(pdir / "summary.json", r.summary().dump(2) + "\n");
  return rows;
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s == "-nan" || s.empty()) return nan();
  return std::stod(s);
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream o;
  o << "# units: value=SI omega=rad/s damping=1/s temperatures=K B=rad/s C=1/s a1,a2=V\n";
  o << "point,value,axis,omega,damping,t0,eta,phase,t_equipartition,t_linewidth,B,C,Q,a1,a2,"
       "status,error\n";
  for (const auto& r : rows) {
    o << r.point << ',' << num(r.value) << ',' << r.axis << ',' << num(r.omega) << ','
      << num(r.damping) << ',' << num(r.t0) << ',' << num(r.eta) << ',' << num(r.phase) << ','
      << num(r.t_equipartition) << ',' << num(r.t_linewidth) << ',' << num(r.B) << ','
      << num(r.C) << ',' << num(r.Q) << ',' << num(r.a1) << ',' << num(r.a2) << ','
      << r.status << ',' << sanitize(r.error) << '\n';
  }
  return o.str();
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<SweepRow> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() == 16) f.emplace_back();
    if (f.size() != 17) throw std::runtime_error("sweep CSV: malformed row: " + line);
    SweepRow r;
    r.point = std::stoul(f[0]);
    r.value = parse_double(f[1]);
    r.axis = f[2];
    r.omega = parse_double(f[3]);
    r.damping = parse_double(f[4]);
    r.t0 = parse_double(f[5]);
    r.eta = parse_double(f[6]);
    r.phase = parse_double(f[7]);
    r.t_equipartition = parse_double(f[8]);
    r.t_linewidth = parse_double(f[9]);
    r.B = parse_double(f[10]);
    r.C = parse_double(f[11]);
    r.Q = parse_double(f[12]);
    r.a1 = parse_double(f[13]);
    r.a2 = parse_double(f[14]);
    r.status = f[15];
    r.error = f[16];
    rows.push_back(r);
  }
  return rows;
}

json to_json(const SweepMeta& m) {
  return {{"variable", sweep_variable_name(m.variable)},
          {"config_digest", m.digest},
          {"focal_length_m", m.focal_length},
          {"wavelength_m", m.wavelength},
          {"waist_m", m.waist},
          {"density_kg_m3", m.density},
          {"nep_v_rthz", m.nep},
          {"scan_omega_rad_s", m.scan_omega},
          {"scan_temperature_k", m.scan_temperature}};
}

SweepMeta sweep_meta_from_json(const json& j) {
  SweepMeta m;
  m.variable = parse_sweep_variable(j.at("variable").get<std::string>());
  m.digest = j.at("config_digest").get<std::string>();
  m.focal_length = j.at("focal_length_m").get<double>();
  m.wavelength = j.at("wavelength_m").get<double>();
  m.waist = j.at("waist_m").get<double>();
  m.density = j.at("density_kg_m3").get<double>();
  m.nep = j.at("nep_v_rthz").get<double>();
  m.scan_omega = j.at("scan_omega_rad_s").get<double>();
  m.scan_temperature = j.at("scan_temperature_k").get<double>();
  return m;
}

json summarize_sweep(const SweepMeta& meta, const std::vector<SweepRow>& rows) {
  json out;
  out["variable"] = sweep_variable_name(meta.variable);
  out["config_digest"] = meta.digest;
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (r.status == "failed") ++failed;
  out["failed_rows"] = failed;

  if (meta.variable == SweepVariable::wavelength) {
    WavelengthScan scan;
    for (const auto& r : rows) {
      if (r.status == "failed") continue;
      scan.wavelength.push_back(r.value);
      scan.first.push_back(r.a1);
      scan.second.push_back(r.a2);
    }
    ScanInputs in;
    in.trap.focal_length = meta.focal_length;
    in.trap.wavelength = meta.wavelength;
    in.trap.waist = meta.waist;
    in.temperature = meta.scan_temperature;
    in.omega0 = meta.scan_omega;
    in.density = meta.density;
    in.nep = meta.nep;
    try {
      out["calibration"] = to_json(wavelength_scan_calibration(scan, in));
    } catch (const std::exception& e) {
      out["calibration"] = {{"resolved", false}, {"note", e.what()}};
    }
    return out;
  }

  json per_axis = json::object();
  for (Axis a : kAxes) {
    const std::string n(axis_name(a));
    std::vector<double> v, t, lw;
    double omega = 0.0, damping = 0.0, t0 = 0.0;
    for (const auto& r : rows) {
      if (r.axis != n || r.status == "failed" || !(r.t_equipartition > 0.0)) continue;
      v.push_back(r.value);
      t.push_back(r.t_equipartition);
      lw.push_back(r.t_linewidth);
      omega = r.omega;
      damping = r.damping;
      t0 = r.t0;
    }
    json e;
    e["points"] = v.size();
    if (v.size() < 2) {
      per_axis[n] = e;
      continue;
    }
    switch (meta.variable) {
      case SweepVariable::pressure: {
        const double s = loglog_slope(v, t);
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
          mx += std::log10(v[i]);
          my += std::log10(t[i]);
        }
        mx /= static_cast<double>(v.size());
        my /= static_cast<double>(v.size());
        const double intercept = my - s * mx;
        const double t_ground = c::hbar * omega / c::boltzmann;
        e["loglog_slope"] = s;
        e["log10_intercept"] = intercept;
        e["ground_state_temperature_k"] = t_ground;
        e["ground_state_pressure_pa"] =
            s != 0.0 ? std::pow(10.0, (std::log10(t_ground) - intercept) / s) : nan();
        break;
      }
      case SweepVariable::eta: {
        // G0 (T0/T - 1) = g eta w0 / 2 ; g = 1 reproduces the cooling law.
        double sxy = 0, sxx = 0;
        std::size_t onset = v.size();
        for (std::size_t i = 0; i < v.size(); ++i) {
          const double x = v[i] * omega / 2.0;
          sxy += x * damping * (t0 / t[i] - 1.0);
          sxx += x * x;
          if (onset == v.size() && i > 0 && t[i] > t[i - 1] * 1.05) onset = i;
        }
        e["gain_ratio"] = sxx > 0 ? sxy / sxx : nan();
        e["heating_onset_eta"] = onset < v.size() ? json(v[onset]) : json(nullptr);
        e["heating_flagged"] = onset < v.size();
        break;
      }
      case SweepVariable::phi: {
        const auto fit = fit_phase_law(v, t, t0, damping, omega);
        double commanded = 0.0;
        for (const auto& r : rows)
          if (r.axis == n) commanded = r.eta;
        std::size_t hot = 0;
        for (double ti : t)
          if (ti > t0 * 1.05) ++hot;
        e["eta_fit"] = fit.eta;
        e["eta_commanded"] = commanded;
        e["eta_ratio"] = commanded > 0 ? fit.eta / commanded : nan();
        e["phase_offset_rad"] = fit.phase_offset;
        e["rms_log_residual"] = fit.residual;
        e["converged"] = fit.converged;
        e["heating_points"] = hot;
        break;
      }
      case SweepVariable::wavelength: break;
    }
    per_axis[n] = e;
  }
  out["axes"] = per_axis;
  return out;
}

SweepOutcome run_sweep(const ExperimentConfig& cfg, const fs::path& dir, unsigned workers) {
  if (!cfg.sweep) throw ConfigError("sweep", "config has no sweep section");
  cfg.validate();
  fs::create_directories(dir);
  const std::size_t n = cfg.sweep->values.size();
  std::vector<std::vector<SweepRow>> results(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = simulate_point(cfg, i, dir);
      } catch (const std::exception& e) {
        SweepRow row;
        row.point = i;
        row.value = cfg.sweep->values[i];
        row.axis = "-";
        row.status = "failed";
        row.error = e.what();
        row.t_equipartition = row.t_linewidth = row.B = row.C = row.Q = row.a1 = row.a2 = nan();
        results[i] = {row};
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SweepOutcome out;
  out.meta.variable = cfg.sweep->variable;
  out.meta.digest = cfg.digest();
  out.meta.focal_length = cfg.trap.focal_length;
  out.meta.wavelength = cfg.trap.wavelength;
  out.meta.waist = cfg.trap.waist;
  out.meta.density = cfg.particle.density;
  out.meta.nep = cfg.detector.nep_exp;
  const MotionModel m = motion_model(cfg);
  out.meta.scan_omega = m.angular_frequencies().z();
  out.meta.scan_temperature = cfg.gas.temperature;
  for (auto& r : results)
    for (auto& row : r) {
      if (row.status == "failed") ++out.failures;
      out.rows.push_back(row);
    }
  out.summary = summarize_sweep(out.meta, out.rows);
  atomic_write(dir / "sweep.csv", sweep_csv(out.rows));
  atomic_write(dir / "sweep_meta.json", to_json(out.meta).dump(2) + "\n");
  atomic_write(dir / "sweep_summary.json", out.summary.dump(2) + "\n");
  atomic_write(dir / "config.canonical", cfg.canonical());
  return out;
}

// ---------------------------------------------------------------- report

Report build_report(const fs::path& dir) {
  Report rep;
  std::ostringstream o;
  const bool has_run = fs::exists(dir / "summary.json");
  const bool has_sweep = fs::exists(dir / "sweep.csv");
  if (!fs::exists(dir) || (!has_run && !has_sweep)) {
    rep.empty = true;
    rep.text = "nothing to report in " + dir.string() + "\n";
    return rep;
  }
  if (has_run) {
    const json s = json::parse(read_file(dir / "summary.json"));
    for (const char* f : {"trace.bin", "fits.json", "spectrum_x.csv", "spectrum_y.csv", "spectrum_z.csv"})
      if (!fs::exists(dir / f)) rep.missing.push_back(f);
    o << "Run report  digest " << s.value("config_digest", "") << "  seed " << s.value("seed", 0)
      << "  feedback " << s.value("feedback_mode", "") << "\n\n";
    o << "mass (model)            " << short_num(s.value("mass_kg", 0.0)) << " kg\n";
    o << "gas damping (model)     " << short_num(s.value("damping_per_s", 0.0)) << " 1/s\n";
    o << "conversion factor model " << short_num(s.value("gamma_model_v_m", 0.0)) << " V/m\n\n";
    o << "axis  f0[Hz]      B[rad/s]    C[1/s]      Q           T_eq[K]     T_lw[K]\n";
    for (const char* a : {"x", "y", "z"}) {
      const json& e = s["axes"][a];
      const bool fit = e.contains("fit") && !e["fit"].is_null();
      char line[200];
      std::snprintf(line, sizeof line, "%-5s %-11.4g %-11.6g %-11.4g %-11.4g %-11.4g %-11.4g\n", a,
                    e.value("frequency_hz", 0.0), fit ? e["fit"].value("B_rad_s", 0.0) : 0.0,
                    fit ? e["fit"].value("C_per_s", 0.0) : 0.0,
                    fit ? e["fit"].value("quality_factor", 0.0) : 0.0,
                    e.value("t_equipartition_k", 0.0),
                    e["t_linewidth_k"].is_null() ? 0.0 : e["t_linewidth_k"].get<double>());
      o << line;
    }
    const json& z = s["axes"]["z"];
    if (z.contains("reference") && !z["reference"].is_null()) {
      const json& ref = z["reference"];
      auto val = [&](const char* k) {
        return ref[k].is_null() ? std::string("n/a") : short_num(ref[k].get<double>());
      };
      o << "\nreference parameters (z detector fit)\n";
      o << "  radius r      " << val("radius_m") << " m\n";
      o << "  mass m        " << val("mass_kg") << " kg\n";
      o << "  gamma         " << val("gamma_v_m") << " V/m\n";
      o << "  S_x,min       " << val("resolution_m_rthz") << " m/sqrt(Hz)\n";
      if (!ref.value("note", std::string()).empty()) o << "  note: " << ref["note"].get<std::string>() << "\n";
    }
    const json& lim = s["limits"];
    o << "\nquantum limits (z)\n";
    o << "  x_ground      " << short_num(lim.value("ground_size_m", 0.0)) << " m\n";
    o << "  zero point    " << short_num(lim.value("zero_point_m", 0.0)) << " m\n";
    o << "  occupancy     " << short_num(lim.value("occupancy", 0.0)) << "\n";
    o << "  recoil rate   " << short_num(lim.value("recoil_rate_per_s", 0.0)) << " 1/s\n";
    o << "\nchecks\n";
    for (const auto& ck : s["checks"]) {
      const bool ok = ck.value("passed", false);
      rep.checks_passed = rep.checks_passed && ok;
      o << "  [" << (ok ? "PASS" : "FAIL") << "] " << ck.value("name", "") << "  "
        << ck.value("detail", "") << "\n";
    }
  }
  if (has_sweep) {
    const auto rows = parse_sweep_csv(read_file(dir / "sweep.csv"));
    if (!fs::exists(dir / "sweep_meta.json")) {
      rep.missing.push_back("sweep_meta.json");
    } else {
      const SweepMeta meta = sweep_meta_from_json(json::parse(read_file(dir / "sweep_meta.json")));
      o << "Sweep report  variable " << sweep_variable_name(meta.variable) << "  digest "
        << meta.digest << "\n\n";
      o << "point value        axis T_eq[K]     T_lw[K]     C[1/s]      a1[V]       a2[V]       status\n";
      for (const auto& r : rows) {
        char line[240];
        std::snprintf(line, sizeof line, "%-5zu %-12.5g %-4s %-11.4g %-11.4g %-11.4g %-11.4g %-11.4g %s\n",
                      r.point, r.value, r.axis.c_str(), r.t_equipartition, r.t_linewidth, r.C,
                      r.a1, r.a2, r.status.c_str());
        o << line;
        if (r.status == "failed") rep.checks_passed = false;
      }
      o << "\nsummary\n" << summarize_sweep(meta, rows).dump(2) << "\n";
    }
  }
  if (!rep.missing.empty()) {
    o << "\nmissing artifacts:";
    for (const auto& m : rep.missing) o << ' ' << m;
    o << "\n";
  }
  rep.text = o.str();
  return rep;
}

CalibrationOutcome run_calibration(const ExperimentConfig& cfg) {
  cfg.validate();
  CalibrationOutcome out;
  const MotionModel m = motion_model(cfg);
  out.omega = m.angular_frequencies().z();
  out.mass_true = m.mass;
  out.z0_true = cfg.scan.amplitude.value_or(
      std::sqrt(c::boltzmann * cfg.gas.temperature / m.stiffness.z()));
  const auto grid = wavelength_grid(cfg.scan.start, cfg.scan.stop, cfg.scan.step);
  ScanSynthesis syn{cfg.scan.cycles, cfg.scan.samples_per_cycle, cfg.sim.seed, true};
  out.scan = synthesize_wavelength_scan(cfg.trap, cfg.detector, out.z0_true, out.omega, grid, syn);
  ScanInputs in{cfg.trap, cfg.gas.temperature, out.omega, cfg.particle.density, cfg.detector.nep_exp};
  out.calibration = wavelength_scan_calibration(out.scan, in);
  return out;
}

QuantumMetrics run_limits(const ExperimentConfig& cfg) {
  cfg.validate();
  const MotionModel m = motion_model(cfg);
  const Axis a = cfg.limits.axis;
  QuantumInputs q;
  q.particle = cfg.particle;
  q.trap = cfg.trap;
  q.detector = cfg.detector;
  q.omega0 = m.angular_frequencies()[a];
  q.temperature = cfg.limits.temperature.value_or(cfg.gas.temperature);
  q.level = cfg.limits.level;
  q.extra_damping = cfg.sim.feedback_mode == FeedbackMode::none
                        ? 0.0
                        : cfg.feedback.eta[a] * q.omega0 / 2.0;
  return quantum_limits(q);
}

}  // namespace levtwin
