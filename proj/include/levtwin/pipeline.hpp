#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "levtwin/analysis.hpp"
#include "levtwin/config.hpp"
#include "levtwin/feedback.hpp"

namespace levtwin {

namespace fs = std::filesystem;

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AxisResult {
  double omega = 0.0;            // configured trap frequency, rad/s
  double eta = 0.0;
  double phase = 0.0;
  double t_equipartition = 0.0;  // m w^2 <x^2> / k_B
  std::optional<LorentzFit> fit;          // position spectrum
  std::optional<TemperatureEstimate> t_linewidth;  // T0 G0 / C, G0 from the gas model
  std::optional<LorentzFit> voltage_fit;  // detector spectrum
  std::optional<ReferenceParams> reference;  // no-feedback runs only
  std::string error;
};

struct RunResult {
  std::string digest;
  std::uint64_t seed = 0;
  FeedbackMode mode = FeedbackMode::none;
  MotionModel model;
  double gamma_model = 0.0;  // small-motion z conversion factor, V/m
  TimeTrace trace;
  std::optional<TimeTrace> voltage;
  Axis3<Spectrum> spectra;
  std::optional<Spectrum> voltage_spectrum;
  Axis3<AxisResult> axes;
  std::size_t saturations = 0;
  std::size_t steps = 0;
  Axis3<bool> locked{};            // at the end of the run
  Axis3<double> locked_fraction{};  // over the recorded span
  std::optional<Telemetry> telemetry;
  QuantumMetrics limits;

  std::vector<Check> checks() const;
  nlohmann::json summary() const;
};

struct RunOptions {
  bool analyse_voltage = true;
  bool keep_trace = true;
};

/// Simulates and analyses one configuration. Throws on integration failure.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Writes trace, spectra, fits, telemetry and summary.json into `dir`.
void write_run(const RunResult& run, const ExperimentConfig& cfg, const fs::path& dir);

struct SweepRow {
  std::size_t point = 0;
  double value = 0.0;
  std::string axis;           // x, y, z
  double omega = 0.0;         // configured, rad/s
  double damping = 0.0;       // gas G0, s^-1
  double t0 = 0.0;            // bath temperature, K
  double eta = 0.0;
  double phase = 0.0;
  double t_equipartition = 0.0;
  double t_linewidth = 0.0;
  double B = 0.0;
  double C = 0.0;
  double Q = 0.0;
  double a1 = 0.0;            // wavelength sweeps only
  double a2 = 0.0;
  std::string status = "ok";
  std::string error;
};

struct SweepMeta {
  SweepVariable variable = SweepVariable::pressure;
  std::string digest;
  double focal_length = 0.0;
  double wavelength = 0.0;
  double waist = 0.0;
  double density = 0.0;
  double nep = 0.0;
  double scan_omega = 0.0;
  double scan_temperature = 0.0;
};

struct SweepOutcome {
  SweepMeta meta;
  std::vector<SweepRow> rows;
  nlohmann::json summary;
  std::size_t failures = 0;
};

/// Runs every grid point on a pool of `workers` threads; per-point failures
/// are recorded, never dropped.
SweepOutcome run_sweep(const ExperimentConfig& cfg, const fs::path& dir, unsigned workers);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);
nlohmann::json to_json(const SweepMeta& m);
SweepMeta sweep_meta_from_json(const nlohmann::json& j);

/// Derived sweep quantities computed from the rows alone.
nlohmann::json summarize_sweep(const SweepMeta& meta, const std::vector<SweepRow>& rows);

struct Report {
  std::string text;
  bool empty = false;
  bool checks_passed = true;
  std::vector<std::string> missing;
};

Report build_report(const fs::path& dir);

struct CalibrationOutcome {
  WavelengthScan scan;
  ScanCalibration calibration;
  double z0_true = 0.0;
  double mass_true = 0.0;
  double omega = 0.0;
};

CalibrationOutcome run_calibration(const ExperimentConfig& cfg);

QuantumMetrics run_limits(const ExperimentConfig& cfg);

}  // namespace levtwin
