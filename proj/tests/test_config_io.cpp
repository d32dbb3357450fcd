#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "levtwin/config.hpp"
#include "levtwin/constants.hpp"
#include "levtwin/io.hpp"

using namespace levtwin;
namespace c = levtwin::constants;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(schema_version: 1
particle:
  radius_nm: 75
gas:
  pressure_mbar: 7.0e-2
simulation:
  dt_s: 5.0e-8
  duration_s: 0.01
  seed: 3
)";

std::string key_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "<accepted>";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("levtwin_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TimeTrace sample_trace(bool velocity) {
  TimeTrace t;
  t.dt = 1.25e-7;
  t.seed = 0xfeedbeefcafe;
  t.config_digest = "0123456789abcdef";
  for (std::size_t i = 0; i < 257; ++i) {
    t.position.x().push_back(std::sin(0.1 * i) * 1e-9);
    t.position.z().push_back(-std::cos(0.37 * i) * 3e-8 + 1e-300);
    if (velocity) {
      t.velocity.x().push_back(std::cos(0.1 * i) * 1e-4);
      t.velocity.y().push_back(0.0);
      t.velocity.z().push_back(1.0 / (i + 1.0));
    }
  }
  if (velocity) t.position.y().assign(257, 0.0);
  return t;
}

}  // namespace

TEST_CASE("minimal config parses with unit conversion") {
  const ExperimentConfig cfg = parse_config(kMinimal);
  CHECK(cfg.particle.radius == doctest::Approx(75e-9));
  CHECK(cfg.gas.pressure == doctest::Approx(7.0));
  CHECK(cfg.sim.dt == 5e-8);
  CHECK(cfg.sim.seed == 3);
  CHECK_FALSE(cfg.sweep);
}

TEST_CASE("unit suffixes agree") {
  const ExperimentConfig a = parse_config(
      "schema_version: 1\ngas: {pressure_pa: 7.0}\ntrap: {power_mw: 500, waist_nm: 1000}\n"
      "particle: {radius_m: 7.5e-8}\nfeedback: {eta_percent: 0.5, phase_deg: 135}\n");
  const ExperimentConfig b = parse_config(
      "schema_version: 1\ngas: {pressure_mbar: 0.07}\ntrap: {power_w: 0.5, waist_um: 1}\n"
      "particle: {radius_nm: 75}\nfeedback: {eta: 0.005, phase_rad: 2.356194490192345}\n");
  CHECK(a.gas.pressure == doctest::Approx(b.gas.pressure).epsilon(1e-12));
  CHECK(a.trap.power == doctest::Approx(b.trap.power).epsilon(1e-12));
  CHECK(a.trap.waist == doctest::Approx(b.trap.waist).epsilon(1e-12));
  CHECK(a.particle.radius == doctest::Approx(b.particle.radius).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.feedback.eta[i] == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(a.feedback.phase[i] == doctest::Approx(0.75 * c::pi).epsilon(1e-12));
  }
}

TEST_CASE("per-axis feedback settings") {
  const ExperimentConfig cfg = parse_config(
      "schema_version: 1\nfeedback:\n  mode: ideal_force\n  eta: {x: 0.001, z: 0.003}\n");
  CHECK(cfg.sim.feedback_mode == FeedbackMode::ideal_force);
  CHECK(cfg.feedback.eta.x() == 0.001);
  CHECK(cfg.feedback.eta.y() == 0.0);
  CHECK(cfg.feedback.eta.z() == 0.003);
}

TEST_CASE("unknown and malformed keys name their path") {
  CHECK(key_of(std::string(kMinimal) + "bogus: 1\n") == "bogus");
  CHECK(key_of("schema_version: 1\nparticle: {radius_nm: 75, colour: red}\n") == "particle.colour");
  CHECK(key_of("schema_version: 1\nfeedback: {eta: {x: 0.1, w: 0.2}}\n") == "feedback.eta.w");
  CHECK(key_of("schema_version: 1\ngas: {pressure_mbar: lots}\n") == "gas.pressure_mbar");
  CHECK(key_of("schema_version: 1\ngas: {pressure_mbar: 1, pressure_pa: 100}\n") ==
        "gas.pressure_pa");
  CHECK(key_of("schema_version: 1\nfeedback: {mode: magic}\n") == "feedback.mode");
  CHECK(key_of("schema_version: 1\nsweep: {variable: eta, values_mbar: [1]}\n") ==
        "sweep.values_mbar");
  CHECK(key_of("schema_version: 1\nsweep: {variable: pressure}\n") == "sweep.values");
  CHECK(key_of("schema_version: 1\nsimulation: {decimation: 0}\n") == "simulation.decimation");
  CHECK(key_of("particle: {radius_nm: 75}\n") == "schema_version");
  CHECK(key_of("schema_version: 2\n") == "schema_version");
  CHECK(key_of("schema_version: 1\nparticle: {radius_nm: 1}\n") == "particle.radius_nm");
  CHECK_THROWS_AS(parse_config("schema_version: [1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/levtwin.yaml"), ConfigError);
}

TEST_CASE("sweep declarations") {
  const ExperimentConfig cfg = parse_config(
      "schema_version: 1\nsweep: {variable: phi, axis: z, values_deg: [0, 90, 180]}\n");
  REQUIRE(cfg.sweep);
  CHECK(cfg.sweep->variable == SweepVariable::phi);
  CHECK(cfg.sweep->axis == Axis::z);
  REQUIRE(cfg.sweep->values.size() == 3);
  CHECK(cfg.sweep->values[2] == doctest::Approx(c::pi));
  CHECK_THROWS_AS(parse_config("schema_version: 1\nsweep: {variable: pressure, values_mbar: [-1]}\n"),
                  ConfigError);
}

TEST_CASE("config digest is stable and sensitive") {
  const ExperimentConfig a = parse_config(kMinimal);
  // Same content, different layout, order and units.
  const ExperimentConfig b = parse_config(
      "simulation: {seed: 3, duration_s: 0.01, dt_ns: 50}\n"
      "gas: {pressure_pa: 7.0}\nparticle: {radius_m: 7.5e-8}\nschema_version: 1\n");
  CHECK(a.digest() == b.digest());
  CHECK(a.digest().size() == 16);
  CHECK(a.canonical() == parse_config(kMinimal).canonical());

  // Output location does not enter the digest.
  ExperimentConfig o = a;
  o.output.directory = "elsewhere";
  CHECK(o.digest() == a.digest());

  ExperimentConfig changed = a;
  changed.sim.seed = 4;
  CHECK(changed.digest() != a.digest());
  changed = a;
  changed.feedback.eta.y() = 1e-3;
  CHECK(changed.digest() != a.digest());
  changed = a;
  changed.gas.pressure *= 1.0 + 1e-12;
  CHECK(changed.digest() != a.digest());
  changed = a;
  changed.detector.add_noise = false;
  CHECK(changed.digest() != a.digest());
}

TEST_CASE("motion model from a config") {
  const ExperimentConfig cfg = parse_config(kMinimal);
  const MotionModel m = motion_model(cfg);
  CHECK(m.mass == doctest::Approx(cfg.particle.mass()));
  CHECK(m.damping == doctest::Approx(gas_damping(cfg.gas, cfg.particle).rate));
  CHECK(m.temperature == cfg.gas.temperature);
  CHECK(m.recoil_rate == 0.0);
}

TEST_CASE("binary trace round trip is exact") {
  for (bool velocity : {false, true}) {
    const TimeTrace t = sample_trace(velocity);
    const TimeTrace r = decode_trace(encode_trace(t));
    CHECK(r.dt == t.dt);
    CHECK(r.seed == t.seed);
    CHECK(r.config_digest == t.config_digest);
    CHECK(r.unit == t.unit);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.position[i] == t.position[i]);
      CHECK(r.velocity[i] == t.velocity[i]);
    }
    CHECK(encode_trace(r) == encode_trace(t));
  }
  const fs::path dir = scratch("trace");
  TimeTrace v = sample_trace(false);
  v.unit = SignalUnit::volts;
  write_trace_binary(dir / "t.bin", v);
  const TimeTrace back = read_trace_binary(dir / "t.bin");
  CHECK(back.unit == SignalUnit::volts);
  CHECK(back.position.z() == v.position.z());
}

TEST_CASE("binary trace rejects corrupt input") {
  const std::string good = encode_trace(sample_trace(false));
  CHECK_THROWS(decode_trace(good.substr(0, good.size() - 3)));
  std::string bad = good;
  bad[0] = 'X';
  CHECK_THROWS(decode_trace(bad));
  CHECK_THROWS(decode_trace(""));
}

TEST_CASE("CSV trace round trip") {
  const fs::path dir = scratch("csv");
  const TimeTrace t = sample_trace(false);
  write_trace_csv(dir / "t.csv", t);
  const TimeTrace r = read_trace_csv(dir / "t.csv");
  CHECK(r.dt == doctest::Approx(t.dt).epsilon(1e-12));
  CHECK(r.position.x() == t.position.x());
  CHECK(r.position.z() == t.position.z());
  CHECK(r.position.y().empty());
  CHECK(trace_csv(t).rfind("# unit=", 0) == 0);

  std::ofstream(dir / "ext.csv") << "t,z\n0,1e-9\n1e-6,2e-9\n2e-6,-1e-9\n";
  const TimeTrace e = read_trace_csv(dir / "ext.csv", SignalUnit::volts);
  CHECK(e.unit == SignalUnit::volts);
  CHECK(e.dt == doctest::Approx(1e-6));
  CHECK(e.position.z().size() == 3);
  std::ofstream(dir / "bad.csv") << "t,q\n0,1\n1,2\n";
  CHECK_THROWS(read_trace_csv(dir / "bad.csv"));
}

TEST_CASE("atomic write replaces whole files") {
  const fs::path dir = scratch("atomic");
  atomic_write(dir / "a.txt", "first");
  atomic_write(dir / "a.txt", "second version");
  CHECK(read_file(dir / "a.txt") == "second version");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  atomic_write(dir / "sub" / "deeper" / "b.txt", "x");
  CHECK(read_file(dir / "sub" / "deeper" / "b.txt") == "x");
  CHECK_THROWS(atomic_write(dir / "a.txt" / "c.txt", "x"));
}

TEST_CASE("spectrum and fit serialisation") {
  Spectrum s;
  s.convention = SpectrumConvention::one_sided_hertz;
  s.frequency = {0.0, 1.0, 2.0};
  s.density = {1e-20, 2e-20, 3e-20};
  const std::string csv = spectrum_csv(s);
  CHECK(csv.rfind("#", 0) == 0);
  CHECK(csv.find("3e-20") != std::string::npos);

  LorentzFit f;
  f.A = 1.0;
  f.B = 2.0;
  f.C = 3.0;
  f.converged = true;
  const auto j = to_json(f);
  CHECK(j.at("B_rad_s").get<double>() == 2.0);
  CHECK(j.at("converged").get<bool>());
}
