#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levtwin/detector.hpp"
#include "levtwin/dynamics.hpp"
#include "levtwin/model.hpp"
#include "levtwin/spectrum.hpp"

namespace levtwin {

struct WelchConfig {
  std::size_t segment_length = 0;  // 0 picks the largest power of two giving >= 8 averages
  double overlap = 0.5;
  bool remove_mean = true;
};

/// Hann-windowed Welch estimate, one-sided density in Hz. Needs >= 4 segments.
Spectrum welch_psd(std::span<const double> signal, double dt, const WelchConfig& cfg = {},
                   SignalUnit unit = SignalUnit::meters);
Spectrum welch_psd(const TimeTrace& trace, Axis axis, const WelchConfig& cfg = {});

/// Fit window in angular frequency. Zero bounds select B0 -/+ `half_widths` C0
/// around the highest point.
struct FitBand {
  double omega_min = 0.0;
  double omega_max = 0.0;
  double half_widths = 20.0;
};

/// S(w) = A / ((B^2 - w^2)^2 + w^2 C^2) in the two-sided angular convention.
struct LorentzFit {
  double A = 0.0;
  double B = 0.0;  // w0 + dw, rad/s
  double C = 0.0;  // G0 + dG, s^-1
  std::array<double, 9> covariance{};  // row-major over (A, B, C)
  double residual = 0.0;               // RMS log residual
  std::size_t points = 0;
  int evaluations = 0;
  bool converged = false;
  std::string diagnostic;
  SignalUnit unit = SignalUnit::meters;

  double sigma(std::size_t i) const;
  /// Variance from the area under the curve, pi A / (B^2 C).
  double variance() const;
};

double lorentzian(double A, double B, double C, double omega);

/// Damped least squares in log space. Hz spectra are converted on entry.
LorentzFit fit_lorentzian(const Spectrum& spectrum, const FitBand& band = {});

double quality_factor(const LorentzFit& fit);

/// Calibrated quantities from a no-feedback fit at known T0 (and pressure).
struct ReferenceParams {
  std::optional<double> radius;     // m
  std::optional<double> mass;       // kg
  std::optional<double> gamma;      // V/m (1 for traces already in metres)
  std::optional<double> resolution; // S_x,min, m/sqrt(Hz)
  std::string note;
};

ReferenceParams extract_reference_params(const LorentzFit& fit, const std::optional<GasSpec>& gas,
                                         double temperature, double density, double nep);

struct TemperatureEstimate {
  double temperature = 0.0;
  double sigma = 0.0;
  bool heating = false;
};

/// T0 C_ref / C_cooled with uncertainty from both linewidths.
TemperatureEstimate extract_temperature(const LorentzFit& cooled, const LorentzFit& reference,
                                        double temperature);

/// Same relation with an explicitly supplied reference damping.
TemperatureEstimate extract_temperature(const LorentzFit& cooled, double reference_damping,
                                        double reference_sigma, double temperature);

/// m w^2 <x^2> / k_B from a position record.
double equipartition_temperature(std::span<const double> position, double mass, double omega0);

struct AllanCurve {
  std::vector<double> tau;
  std::vector<double> sigma;
  std::vector<std::size_t> segments;
  std::vector<double> rejected;  // requested tau with fewer than two segments
};

AllanCurve allan_deviation(std::span<const double> signal, double dt,
                           std::span<const double> taus);

/// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

struct ScanCalibration {
  bool resolved = false;
  std::string note;
  std::vector<double> theta;  // rad, per wavelength (up to a constant)
  double first_scale = 0.0;   // max |a1| over theta, V
  double second_scale = 0.0;  // max |a2| over theta, V
  double ratio = 0.0;         // J2/J1
  double beta = 0.0;          // exact Bessel inversion
  double beta_small = 0.0;    // 4 ratio
  double z0 = 0.0;            // m
  double gamma = 0.0;         // V/m
  double mass = 0.0;          // kg
  double radius = 0.0;        // m
  double resolution = 0.0;    // NEP / gamma, m/sqrt(Hz)
};

struct ScanInputs {
  TrapSpec trap;
  double temperature = 300.0;  // K
  double omega0 = 0.0;         // rad/s of the scanned axis
  double density = 1850.0;     // kg/m^3
  double nep = 0.0;            // V/sqrt(Hz)
};

/// Inverts a wavelength scan: fits |a1| ~ |sin theta|, |a2| ~ |cos theta|,
/// solves J2/J1 for beta and applies z0 = beta / (k - 1/z_R), m = kT/(w^2 z0^2).
ScanCalibration wavelength_scan_calibration(const WavelengthScan& scan, const ScanInputs& in);

struct QuantumInputs {
  ParticleSpec particle;
  TrapSpec trap;
  DetectorSpec detector;
  double omega0 = 0.0;          // rad/s
  double temperature = 0.0;     // K, T_n for the occupancy
  int level = 1;                // n in sqrt(T_{n+1}) - sqrt(T_n)
  double extra_damping = 0.0;   // dG for the phonon limit, s^-1
  std::optional<double> patch;  // x0 = y0 exploring the focus; x_ground if unset
};

struct QuantumMetrics {
  double ground_size = 0.0;     // x_ground, m
  double zero_point = 0.0;      // dx, m
  double occupancy = 0.0;       // n
  double scattered_power = 0.0; // W
  double recoil_rate = 0.0;     // s^-1
  double phonon_limit = 0.0;    // G_recoil / dG, 0 when dG is 0
};

QuantumMetrics quantum_limits(const QuantumInputs& in);

/// Recoil heating rate (1/5)(P/(m c^2))(2 pi c/(lambda w0)).
double recoil_rate(double scattered_power, double mass, double wavelength, double omega0);

/// Fit of T(phi) = T0 / (1 - eta w0 sin(2 (phi - phi0)) / (2 G0)) with free eta, phi0.
struct PhaseLawFit {
  double eta = 0.0;
  double phase_offset = 0.0;
  double residual = 0.0;
  bool converged = false;
};

PhaseLawFit fit_phase_law(std::span<const double> phase, std::span<const double> temperature,
                          double t0, double damping, double omega0);

/// Least-squares slope of log10(y) against log10(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace levtwin
