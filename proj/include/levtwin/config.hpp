#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "levtwin/detector.hpp"
#include "levtwin/dynamics.hpp"
#include "levtwin/feedback.hpp"
#include "levtwin/model.hpp"

namespace levtwin {

inline constexpr int kSchemaVersion = 1;

enum class SweepVariable { pressure, eta, phi, wavelength };

std::string sweep_variable_name(SweepVariable v);
SweepVariable parse_sweep_variable(std::string_view s);

/// Values are SI: Pa, fraction, rad, m.
struct SweepSpec {
  SweepVariable variable = SweepVariable::pressure;
  std::vector<double> values;
  std::optional<Axis> axis;  // eta / phi sweeps: one axis, or all when unset
};

struct AnalysisSpec {
  std::size_t segment_length = 0;  // 0: automatic
  double fit_half_widths = 20.0;
};

/// Synthetic wavelength scan for calibration.
struct ScanSpec {
  double start = 1545e-9;       // m
  double stop = 1555e-9;        // m
  double step = 5e-12;          // m
  std::optional<double> amplitude;  // z0, m; equipartition value when unset
  int cycles = 64;
  int samples_per_cycle = 32;
};

struct OutputSpec {
  std::string directory = "out";
  bool trace_csv = false;
  std::size_t telemetry_stride = 0;
};

struct LimitsSpec {
  Axis axis = Axis::z;
  std::optional<double> temperature;  // K, default: gas temperature
  int level = 1;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ParticleSpec particle;
  TrapSpec trap;
  PolarizationSplit split;
  GasSpec gas;
  DetectorSpec detector;
  FeedbackSpec feedback;
  SimControl sim;
  bool recoil_heating = false;
  AnalysisSpec analysis;
  ScanSpec scan;
  LimitsSpec limits;
  std::optional<SweepSpec> sweep;
  OutputSpec output;

  void validate() const;
  /// Stable text form of every parsed field; the digest hashes this.
  std::string canonical() const;
  /// First 16 hex characters of SHA-256 over canonical().
  std::string digest() const;
};

/// Parses YAML text. Unknown keys and malformed values raise ConfigError
/// carrying the dotted key path.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Linear motion model implied by a config (mass, stiffness, gas damping).
MotionModel motion_model(const ExperimentConfig& cfg);

}  // namespace levtwin
