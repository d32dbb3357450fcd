#include "levtwin/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "levtwin/analysis.hpp"
#include "levtwin/constants.hpp"

namespace levtwin {

namespace c = constants;

std::string sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::pressure: return "pressure";
    case SweepVariable::eta: return "eta";
    case SweepVariable::phi: return "phi";
    case SweepVariable::wavelength: return "wavelength";
  }
  return "pressure";
}

SweepVariable parse_sweep_variable(std::string_view s) {
  if (s == "pressure") return SweepVariable::pressure;
  if (s == "eta") return SweepVariable::eta;
  if (s == "phi") return SweepVariable::phi;
  if (s == "wavelength") return SweepVariable::wavelength;
  throw InputError("unknown sweep variable '" + std::string(s) + "'");
}

namespace {

struct Unit {
  const char* suffix;
  double factor;  // to SI
};

// Walks one YAML mapping, remembering which keys were consumed so the rest
// can be reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, "expected a mapping");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  YAML::Node take(const std::string& key) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return YAML::Node();
    return node_[key];
  }

  bool has(const std::string& key) const {
    return node_ && node_.IsMap() && node_[key].IsDefined() && !node_[key].IsNull();
  }

  double to_number(const YAML::Node& n, const std::string& key) const {
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected a number");
    }
  }

  void number(const std::string& key, double& out) {
    auto n = take(key);
    if (n && !n.IsNull()) out = to_number(n, key);
  }

  void integer(const std::string& key, int& out) {
    auto n = take(key);
    if (!n || n.IsNull()) return;
    try {
      out = n.as<int>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected an integer");
    }
  }

  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    auto n = take(key);
    if (!n || n.IsNull()) return;
    try {
      out = n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected a non-negative integer");
    }
  }

  void size(const std::string& key, std::size_t& out) {
    std::uint64_t v = out;
    unsigned_integer(key, v);
    out = static_cast<std::size_t>(v);
  }

  void boolean(const std::string& key, bool& out) {
    auto n = take(key);
    if (!n || n.IsNull()) return;
    try {
      out = n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected true or false");
    }
  }

  void text(const std::string& key, std::string& out) {
    auto n = take(key);
    if (!n || n.IsNull()) return;
    if (!n.IsScalar()) throw ConfigError(key_path(key), "expected a string");
    out = n.as<std::string>();
  }

  /// Reads `base_<suffix>` for whichever single suffix is present.
  bool quantity(const std::string& base, std::initializer_list<Unit> units, double& out) {
    const Unit* found = nullptr;
    std::string found_key;
    for (const auto& u : units) {
      const std::string key = u.suffix[0] ? base + "_" + u.suffix : base;
      seen_.insert(key);
      if (!has(key)) continue;
      if (found)
        throw ConfigError(key_path(key), "conflicts with " + key_path(found_key));
      found = &u;
      found_key = key;
    }
    if (!found) return false;
    out = to_number(node_[found_key], found_key) * found->factor;
    return true;
  }

  /// Scalar or {x, y, z} mapping under `base_<suffix>`.
  bool per_axis(const std::string& base, std::initializer_list<Unit> units, Axis3<double>& out) {
    const Unit* found = nullptr;
    std::string found_key;
    for (const auto& u : units) {
      const std::string key = u.suffix[0] ? base + "_" + u.suffix : base;
      seen_.insert(key);
      if (!has(key)) continue;
      if (found)
        throw ConfigError(key_path(key), "conflicts with " + key_path(found_key));
      found = &u;
      found_key = key;
    }
    if (!found) return false;
    YAML::Node n = node_[found_key];
    if (n.IsScalar()) {
      out = Axis3<double>::uniform(to_number(n, found_key) * found->factor);
      return true;
    }
    Section axes(n, key_path(found_key));
    for (Axis a : kAxes) {
      double v = out[a] / found->factor;
      axes.number(std::string(axis_name(a)), v);
      out[a] = v * found->factor;
    }
    axes.finish();
    return true;
  }

  Section child(const std::string& key) { return Section(take(key), key_path(key)); }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr Unit kMeters{"m", 1.0};
constexpr Unit kNano{"nm", 1e-9};
constexpr Unit kMicro{"um", 1e-6};
constexpr Unit kMilli{"mm", 1e-3};
constexpr Unit kPico{"pm", 1e-12};

void parse_particle(Section s, ParticleSpec& p) {
  s.quantity("radius", {kNano, kMeters}, p.radius);
  s.quantity("density", {{"kg_m3", 1.0}}, p.density);
  s.number("refractive_index", p.refractive_index);
  s.finish();
}

void parse_trap(Section s, TrapSpec& t, PolarizationSplit& split) {
  s.quantity("power", {{"w", 1.0}, {"mw", 1e-3}}, t.power);
  s.quantity("wavelength", {kNano, kMeters}, t.wavelength);
  s.quantity("waist", {kMicro, kNano, kMeters}, t.waist);
  s.quantity("focal_length", {kMilli, kMeters}, t.focal_length);
  s.quantity("mirror_radius", {kMilli, kMeters}, t.mirror_radius);
  s.number("xy_asymmetry", split.xy_asymmetry);
  s.finish();
}

void parse_gas(Section s, GasSpec& g) {
  s.quantity("pressure", {{"mbar", c::pascal_per_mbar}, {"pa", 1.0}}, g.pressure);
  s.quantity("temperature", {{"k", 1.0}}, g.temperature);
  s.quantity("viscosity", {{"pa_s", 1.0}}, g.viscosity);
  s.quantity("molecule_diameter", {kNano, kMeters}, g.molecule_diameter);
  s.finish();
}

void parse_detector(Section s, DetectorSpec& d) {
  s.number("scattered_amplitude", d.scattered_amplitude);
  s.number("reference_amplitude", d.reference_amplitude);
  s.number("volts_per_intensity", d.volts_per_intensity);
  s.quantity("phase_offset", {{"rad", 1.0}, {"deg", c::pi / 180.0}}, d.phase_offset);
  s.quantity("nep_det", {{"v_rthz", 1.0}, {"nv_rthz", 1e-9}}, d.nep_det);
  s.quantity("nep_exp", {{"v_rthz", 1.0}, {"uv_rthz", 1e-6}}, d.nep_exp);
  s.quantity("responsivity", {{"a_w", 1.0}}, d.responsivity);
  s.quantity("transimpedance", {{"v_a", 1.0}}, d.transimpedance);
  s.number("quantum_efficiency", d.quantum_efficiency);
  s.number("transmission", d.transmission);
  s.quantity("pickup_x", {{"v_m", 1.0}}, d.pickup_x);
  s.quantity("pickup_y", {{"v_m", 1.0}}, d.pickup_y);
  s.boolean("noise", d.add_noise);
  s.finish();
}

void parse_feedback(Section s, FeedbackSpec& f, SimControl& sim) {
  std::string mode = feedback_mode_name(sim.feedback_mode);
  s.text("mode", mode);
  try {
    sim.feedback_mode = parse_feedback_mode(mode);
  } catch (const InputError& e) {
    throw ConfigError(s.key_path("mode"), e.what());
  }
  s.per_axis("eta", {{"", 1.0}, {"percent", 0.01}}, f.eta);
  s.per_axis("phase", {{"rad", 1.0}, {"deg", c::pi / 180.0}}, f.phase);
  s.quantity("pll_bandwidth", {{"hz", 1.0}}, f.pll_bandwidth);
  s.quantity("lowpass_cutoff", {{"hz", 1.0}}, f.lowpass_cutoff);
  s.number("capture_range", f.capture_range);
  s.quantity("lock_threshold", {{"rad", 1.0}}, f.lock_threshold);
  s.number("clamp_min", f.clamp_min);
  s.number("clamp_max", f.clamp_max);
  s.quantity("signal_noise", {{"rthz", 1.0}}, f.signal_noise);
  s.number("window_cycles", f.window_cycles);
  s.finish();
}

void parse_simulation(Section s, SimControl& sim, bool& recoil) {
  s.quantity("dt", {{"s", 1.0}, {"ns", 1e-9}}, sim.dt);
  s.quantity("duration", {{"s", 1.0}}, sim.duration);
  s.quantity("warmup", {{"s", 1.0}}, sim.warmup);
  s.integer("decimation", sim.decimation);
  s.unsigned_integer("seed", sim.seed);
  s.boolean("record_velocity", sim.record_velocity);
  s.boolean("recoil_heating", recoil);
  s.finish();
}

void parse_sweep(Section s, SweepSpec& sw) {
  std::string var;
  s.text("variable", var);
  if (var.empty()) throw ConfigError(s.key_path("variable"), "required");
  try {
    sw.variable = parse_sweep_variable(var);
  } catch (const InputError& e) {
    throw ConfigError(s.key_path("variable"), e.what());
  }
  std::string axis;
  s.text("axis", axis);
  if (!axis.empty()) {
    try {
      sw.axis = parse_axis(axis);
    } catch (const InputError& e) {
      throw ConfigError(s.key_path("axis"), e.what());
    }
  }
  std::vector<std::pair<std::string, double>> keys;
  switch (sw.variable) {
    case SweepVariable::pressure: keys = {{"values_mbar", c::pascal_per_mbar}, {"values_pa", 1.0}}; break;
    case SweepVariable::eta: keys = {{"values", 1.0}, {"values_percent", 0.01}}; break;
    case SweepVariable::phi: keys = {{"values_rad", 1.0}, {"values_deg", c::pi / 180.0}}; break;
    case SweepVariable::wavelength: keys = {{"values_nm", 1e-9}, {"values_m", 1.0}}; break;
  }
  const std::string all[] = {"values", "values_percent", "values_mbar", "values_pa",
                             "values_rad", "values_deg", "values_nm", "values_m"};
  bool found = false;
  for (const auto& k : all) {
    if (!s.has(k)) {
      s.take(k);
      continue;
    }
    auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& p) { return p.first == k; });
    if (it == keys.end())
      throw ConfigError(s.key_path(k), "unit does not match sweep variable '" + var + "'");
    if (found) throw ConfigError(s.key_path(k), "more than one values list");
    found = true;
    auto n = s.take(k);
    if (!n.IsSequence() || n.size() == 0)
      throw ConfigError(s.key_path(k), "expected a non-empty list");
    for (std::size_t i = 0; i < n.size(); ++i)
      sw.values.push_back(s.to_number(n[i], k + "[" + std::to_string(i) + "]") * it->second);
  }
  if (!found) throw ConfigError(s.key_path("values"), "required");
  s.finish();
}

void parse_scan(Section s, ScanSpec& sc) {
  s.quantity("start", {kNano, kMeters}, sc.start);
  s.quantity("stop", {kNano, kMeters}, sc.stop);
  s.quantity("step", {kPico, kNano, kMeters}, sc.step);
  double amp = 0.0;
  if (s.quantity("amplitude", {kNano, kMeters}, amp)) sc.amplitude = amp;
  s.integer("cycles", sc.cycles);
  s.integer("samples_per_cycle", sc.samples_per_cycle);
  s.finish();
}

void parse_limits(Section s, LimitsSpec& l) {
  std::string axis;
  s.text("axis", axis);
  if (!axis.empty()) {
    try {
      l.axis = parse_axis(axis);
    } catch (const InputError& e) {
      throw ConfigError(s.key_path("axis"), e.what());
    }
  }
  double t = 0.0;
  if (s.quantity("temperature", {{"k", 1.0}}, t)) l.temperature = t;
  s.integer("level", l.level);
  s.finish();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed YAML: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "");
  if (!top.has("schema_version")) throw ConfigError("schema_version", "required");
  top.integer("schema_version", cfg.schema_version);
  if (cfg.schema_version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " +
                                            std::to_string(cfg.schema_version) + " (expected " +
                                            std::to_string(kSchemaVersion) + ")");
  parse_particle(top.child("particle"), cfg.particle);
  parse_trap(top.child("trap"), cfg.trap, cfg.split);
  parse_gas(top.child("gas"), cfg.gas);
  parse_detector(top.child("detector"), cfg.detector);
  parse_feedback(top.child("feedback"), cfg.feedback, cfg.sim);
  parse_simulation(top.child("simulation"), cfg.sim, cfg.recoil_heating);
  {
    Section a = top.child("analysis");
    a.size("segment_length", cfg.analysis.segment_length);
    a.number("fit_half_widths", cfg.analysis.fit_half_widths);
    a.finish();
  }
  parse_scan(top.child("scan"), cfg.scan);
  parse_limits(top.child("limits"), cfg.limits);
  if (top.has("sweep")) {
    SweepSpec sw;
    parse_sweep(top.child("sweep"), sw);
    cfg.sweep = sw;
  } else {
    top.take("sweep");
  }
  {
    Section o = top.child("output");
    o.text("directory", cfg.output.directory);
    o.boolean("trace_csv", cfg.output.trace_csv);
    o.size("telemetry_stride", cfg.output.telemetry_stride);
    o.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void ExperimentConfig::validate() const {
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const InputError& e) {
      throw ConfigError(section, e.what());
    }
  };
  if (!(particle.radius >= 5e-9 && particle.radius <= 500e-9))
    throw ConfigError("particle.radius_nm", "radius must lie in [5, 500] nm");
  wrap("particle", [&] { particle.validate(); });
  wrap("trap", [&] { trap.validate(); });
  if (!(split.xy_asymmetry > 0.0)) throw ConfigError("trap.xy_asymmetry", "must be > 0");
  wrap("gas", [&] { gas.validate(); });
  wrap("detector", [&] { detector.validate(); });
  wrap("feedback", [&] { feedback.validate(); });
  if (!(sim.dt > 0.0)) throw ConfigError("simulation.dt_s", "must be > 0");
  if (!(sim.duration > 0.0)) throw ConfigError("simulation.duration_s", "must be > 0");
  if (!(sim.warmup >= 0.0)) throw ConfigError("simulation.warmup_s", "must be >= 0");
  if (sim.decimation < 1) throw ConfigError("simulation.decimation", "must be >= 1");
  if (!(analysis.fit_half_widths > 0.0))
    throw ConfigError("analysis.fit_half_widths", "must be > 0");
  if (!(scan.step > 0.0) || !(scan.stop > scan.start)) throw ConfigError("scan", "empty wavelength range");
  if (scan.amplitude && !(*scan.amplitude > 0.0)) throw ConfigError("scan.amplitude_nm", "must be > 0");
  if (scan.cycles < 1 || scan.samples_per_cycle < 8)
    throw ConfigError("scan", "need >= 1 cycle and >= 8 samples per cycle");
  if (limits.level < 0) throw ConfigError("limits.level", "must be >= 0");
  if (sweep) {
    for (double v : sweep->values) {
      const bool ok = (sweep->variable == SweepVariable::pressure && v > 0.0) ||
                      (sweep->variable == SweepVariable::eta && v >= 0.0) ||
                      (sweep->variable == SweepVariable::phi && std::isfinite(v)) ||
                      (sweep->variable == SweepVariable::wavelength && v > 0.0);
      if (!ok) throw ConfigError("sweep.values", "value " + fmt(v) + " outside supported range");
    }
  }
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream o;
  auto put = [&](const char* k, double v) { o << k << '=' << fmt(v) << '\n'; };
  auto put3 = [&](const char* k, const Axis3<double>& v) {
    o << k << '=' << fmt(v.x()) << ',' << fmt(v.y()) << ',' << fmt(v.z()) << '\n';
  };
  o << "schema_version=" << schema_version << '\n';
  put("particle.radius", particle.radius);
  put("particle.density", particle.density);
  put("particle.refractive_index", particle.refractive_index);
  put("trap.power", trap.power);
  put("trap.wavelength", trap.wavelength);
  put("trap.waist", trap.waist);
  put("trap.focal_length", trap.focal_length);
  put("trap.mirror_radius", trap.mirror_radius);
  put("trap.xy_asymmetry", split.xy_asymmetry);
  put("gas.pressure", gas.pressure);
  put("gas.temperature", gas.temperature);
  put("gas.viscosity", gas.viscosity);
  put("gas.molecule_diameter", gas.molecule_diameter);
  put("detector.scattered_amplitude", detector.scattered_amplitude);
  put("detector.reference_amplitude", detector.reference_amplitude);
  put("detector.volts_per_intensity", detector.volts_per_intensity);
  put("detector.phase_offset", detector.phase_offset);
  put("detector.nep_det", detector.nep_det);
  put("detector.nep_exp", detector.nep_exp);
  put("detector.responsivity", detector.responsivity);
  put("detector.transimpedance", detector.transimpedance);
  put("detector.quantum_efficiency", detector.quantum_efficiency);
  put("detector.transmission", detector.transmission);
  put("detector.pickup_x", detector.pickup_x);
  put("detector.pickup_y", detector.pickup_y);
  o << "detector.noise=" << detector.add_noise << '\n';
  o << "feedback.mode=" << feedback_mode_name(sim.feedback_mode) << '\n';
  put3("feedback.eta", feedback.eta);
  put3("feedback.phase", feedback.phase);
  put("feedback.pll_bandwidth", feedback.pll_bandwidth);
  put("feedback.lowpass_cutoff", feedback.lowpass_cutoff);
  put("feedback.capture_range", feedback.capture_range);
  put("feedback.lock_threshold", feedback.lock_threshold);
  put("feedback.clamp_min", feedback.clamp_min);
  put("feedback.clamp_max", feedback.clamp_max);
  put("feedback.signal_noise", feedback.signal_noise);
  put("feedback.window_cycles", feedback.window_cycles);
  put("simulation.dt", sim.dt);
  put("simulation.duration", sim.duration);
  put("simulation.warmup", sim.warmup);
  o << "simulation.decimation=" << sim.decimation << '\n';
  o << "simulation.seed=" << sim.seed << '\n';
  o << "simulation.record_velocity=" << sim.record_velocity << '\n';
  o << "simulation.recoil_heating=" << recoil_heating << '\n';
  o << "analysis.segment_length=" << analysis.segment_length << '\n';
  put("analysis.fit_half_widths", analysis.fit_half_widths);
  put("scan.start", scan.start);
  put("scan.stop", scan.stop);
  put("scan.step", scan.step);
  o << "scan.amplitude=" << (scan.amplitude ? fmt(*scan.amplitude) : "auto") << '\n';
  o << "scan.cycles=" << scan.cycles << '\n';
  o << "scan.samples_per_cycle=" << scan.samples_per_cycle << '\n';
  o << "limits.axis=" << axis_name(limits.axis) << '\n';
  o << "limits.temperature=" << (limits.temperature ? fmt(*limits.temperature) : "gas") << '\n';
  o << "limits.level=" << limits.level << '\n';
  if (sweep) {
    o << "sweep.variable=" << sweep_variable_name(sweep->variable) << '\n';
    o << "sweep.axis=" << (sweep->axis ? std::string(axis_name(*sweep->axis)) : "all") << '\n';
    o << "sweep.values=";
    for (std::size_t i = 0; i < sweep->values.size(); ++i)
      o << (i ? "," : "") << fmt(sweep->values[i]);
    o << '\n';
  }
  // Output location and file selection do not change results and are left out.
  return o.str();
}

std::string ExperimentConfig::digest() const {
  const std::string text = canonical();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < 8; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

MotionModel motion_model(const ExperimentConfig& cfg) {
  MotionModel m;
  m.mass = cfg.particle.mass();
  m.stiffness = spring_constants(cfg.trap, cfg.particle, cfg.split);
  m.damping = gas_damping(cfg.gas, cfg.particle).rate;
  m.temperature = cfg.gas.temperature;
  if (cfg.recoil_heating) {
    QuantumInputs q;
    q.particle = cfg.particle;
    q.trap = cfg.trap;
    q.detector = cfg.detector;
    q.omega0 = m.angular_frequencies().z();
    m.recoil_rate = quantum_limits(q).recoil_rate;
  }
  return m;
}

}  // namespace levtwin
