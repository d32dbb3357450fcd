#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "levtwin/dynamics.hpp"
#include "levtwin/model.hpp"

namespace levtwin {

/// Parabolic-mirror self-homodyne readout. Field amplitudes are in arbitrary
/// units; `volts_per_intensity` maps |E|^2 to photodiode volts.
struct DetectorSpec {
  double scattered_amplitude = 1.0;   // E_scat,0
  double reference_amplitude = 1.0;   // E_div,0
  double volts_per_intensity = 0.5;   // V per field-unit^2
  // Unmodelled optical path phase added to theta = 2fk + pi. At f = 3.1 mm and
  // 1550 nm, 2fk is an exact multiple of 2 pi and the z line would vanish.
  double phase_offset = 1.5707963267948966;
  double nep_det = 70e-9;             // V/sqrt(Hz), photodiode
  double nep_exp = 2e-6;              // V/sqrt(Hz), whole-system floor
  double responsivity = 1.0;          // A/W
  double transimpedance = 1e5;        // V/A
  double quantum_efficiency = 0.8;
  double transmission = 0.5;          // mirror collects half, lossless optics
  double pickup_x = 4e5;              // V/m, x motion leaking into the diode
  double pickup_y = 4e5;              // V/m
  bool add_noise = true;

  void validate() const;
};

/// beta = k z0 - z0 / z_R (small z / z_R).
double beta(double z0, double wavenumber, double rayleigh_range);

/// theta = 2 f k + pi.
double gouy_reference_phase(double focal_length, double wavenumber);

/// Total reference phase including the configured path offset.
double reference_phase(const TrapSpec& trap, const DetectorSpec& det);

/// d(beta)/dz = k - 1/z_R.
double interferometric_wavenumber(const TrapSpec& trap);

struct HarmonicAmplitudes {
  double dc = 0.0;      // E_div^2 + E_scat^2 + 2 E E cos(theta) J0(beta)
  double first = 0.0;   // 2 E E sin(theta) 2 J1(beta)
  double second = 0.0;  // 2 E E cos(theta) 2 J2(beta)
};

HarmonicAmplitudes harmonic_amplitudes(double beta, double theta, double scattered,
                                       double reference);

/// Small-motion volts-per-metre of the z line, gamma.
double conversion_factor(const TrapSpec& trap, const DetectorSpec& det);

/// Instantaneous photodiode model shared by trace conversion and the loop.
class DetectorModel {
 public:
  DetectorModel(const TrapSpec& trap, const DetectorSpec& det, double sample_interval,
                std::uint64_t seed);

  double noiseless(double x, double y, double z) const;
  double sample(double x, double y, double z);
  double noise_std() const { return noise_std_; }

 private:
  double scale_;      // volts per intensity
  double dc_;         // (E_div^2 + E_scat^2) scale
  double cross_;      // 2 E_div E_scat scale
  double theta_;
  double kappa_;
  double pickup_x_, pickup_y_;
  double noise_std_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Voltage trace of a position trace, all three axes summed on one diode.
/// The result carries the signal in its z slot; x, y slots are left empty.
TimeTrace interference_signal(const TimeTrace& trace, const TrapSpec& trap,
                              const DetectorSpec& det, std::uint64_t seed);

struct DetectedPower {
  double cross_section;   // sigma_s, m^2
  double area_fraction;   // eta_Area
  double scattered;       // P_scat, W
  double photon_rate;     // N_scat, 1/s
  double detected;        // P_det, W
  double signal_volts;    // I_det, V
};

/// Rayleigh scattering and detection chain for a particle exploring an
/// x0 by y0 patch of the focus.
DetectedPower detected_power_chain(const ParticleSpec& particle, const TrapSpec& trap,
                                   const DetectorSpec& det, double x0, double y0);

struct WavelengthScan {
  std::vector<double> wavelength;  // m
  std::vector<double> first;       // |a1|, V
  std::vector<double> second;      // |a2|, V
};

struct ScanSynthesis {
  int cycles = 64;
  int samples_per_cycle = 32;
  std::uint64_t seed = 1;
  bool add_noise = true;
};

/// Drives the detector with z(t) = z0 sin(w0 t) at every wavelength and reads
/// the w0 and 2 w0 line amplitudes by single-bin demodulation.
WavelengthScan synthesize_wavelength_scan(TrapSpec trap, const DetectorSpec& det, double z0,
                                          double omega0, std::span<const double> wavelengths,
                                          const ScanSynthesis& opts = {});

/// Evenly stepped grid [start, stop] inclusive.
std::vector<double> wavelength_grid(double start, double stop, double step);

}  // namespace levtwin
