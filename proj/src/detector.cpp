#include "levtwin/detector.hpp"

#include <cmath>
#include <complex>

#include "levtwin/bessel.hpp"
#include "levtwin/constants.hpp"

namespace levtwin {

namespace c = constants;

void DetectorSpec::validate() const {
  if (!(scattered_amplitude >= 0.0) || !(reference_amplitude >= 0.0))
    throw InputError("detector: field amplitudes must be >= 0");
  if (!(volts_per_intensity > 0.0)) throw InputError("detector: volts_per_intensity must be > 0");
  if (!(quantum_efficiency >= 0.0 && quantum_efficiency <= 1.0))
    throw InputError("detector: quantum efficiency must lie in [0, 1]");
  if (!(transmission >= 0.0 && transmission <= 1.0))
    throw InputError("detector: transmission must lie in [0, 1]");
  if (!(nep_det >= 0.0)) throw InputError("detector: NEP_det must be >= 0");
  if (!(nep_exp >= nep_det)) throw InputError("detector: NEP_exp must be >= NEP_det");
  if (!(responsivity >= 0.0) || !(transimpedance >= 0.0))
    throw InputError("detector: responsivity and gain must be >= 0");
  if (!std::isfinite(phase_offset)) throw InputError("detector: phase offset must be finite");
}

double beta(double z0, double wavenumber, double rayleigh_range) {
  if (!(z0 >= 0.0)) throw InputError("beta: z0 must be >= 0");
  if (!(rayleigh_range > 0.0)) throw InputError("beta: Rayleigh range must be > 0");
  return wavenumber * z0 - z0 / rayleigh_range;
}

double gouy_reference_phase(double focal_length, double wavenumber) {
  if (!(focal_length > 0.0)) throw InputError("gouy_reference_phase: f must be > 0");
  return 2.0 * focal_length * wavenumber + c::pi;
}

double reference_phase(const TrapSpec& trap, const DetectorSpec& det) {
  return gouy_reference_phase(trap.focal_length, trap.wavenumber()) + det.phase_offset;
}

double interferometric_wavenumber(const TrapSpec& trap) {
  return trap.wavenumber() - 1.0 / trap.rayleigh_range();
}

HarmonicAmplitudes harmonic_amplitudes(double b, double theta, double scattered,
                                       double reference) {
  if (!(b >= 0.0)) throw InputError("harmonic_amplitudes: beta must be >= 0");
  const double cross = 2.0 * scattered * reference;
  HarmonicAmplitudes h;
  h.dc = reference * reference + scattered * scattered + cross * std::cos(theta) * bessel_j(0, b);
  h.first = cross * std::sin(theta) * 2.0 * bessel_j(1, b);
  h.second = cross * std::cos(theta) * 2.0 * bessel_j(2, b);
  return h;
}

double conversion_factor(const TrapSpec& trap, const DetectorSpec& det) {
  const double cross = 2.0 * det.scattered_amplitude * det.reference_amplitude;
  return std::abs(det.volts_per_intensity * cross * interferometric_wavenumber(trap) *
                  std::sin(reference_phase(trap, det)));
}

DetectorModel::DetectorModel(const TrapSpec& trap, const DetectorSpec& det,
                             double sample_interval, std::uint64_t seed)
    : scale_(det.volts_per_intensity),
      dc_(det.volts_per_intensity * (det.reference_amplitude * det.reference_amplitude +
                                     det.scattered_amplitude * det.scattered_amplitude)),
      cross_(det.volts_per_intensity * 2.0 * det.scattered_amplitude * det.reference_amplitude),
      theta_(reference_phase(trap, det)),
      kappa_(interferometric_wavenumber(trap)),
      pickup_x_(det.pickup_x),
      pickup_y_(det.pickup_y),
      noise_std_(0.0),
      rng_(make_stream(seed, 1)) {
  det.validate();
  trap.validate();
  if (!(sample_interval > 0.0)) throw InputError("detector: sample interval must be > 0");
  // One-sided density NEP^2 over the Nyquist band.
  if (det.add_noise) noise_std_ = det.nep_exp * std::sqrt(0.5 / sample_interval);
}

double DetectorModel::noiseless(double x, double y, double z) const {
  return dc_ + cross_ * std::cos(kappa_ * z - theta_) + pickup_x_ * x + pickup_y_ * y;
}

double DetectorModel::sample(double x, double y, double z) {
  const double v = noiseless(x, y, z);
  return noise_std_ > 0.0 ? v + noise_std_ * gauss_(rng_) : v;
}

TimeTrace interference_signal(const TimeTrace& trace, const TrapSpec& trap,
                              const DetectorSpec& det, std::uint64_t seed) {
  if (trace.unit != SignalUnit::meters)
    throw InputError("interference_signal: input trace must be in meters");
  if (trace.position.z().empty()) throw InputError("interference_signal: empty z trace");
  const std::size_t n = trace.position.z().size();
  const bool has_xy = trace.position.x().size() == n && trace.position.y().size() == n;
  DetectorModel model(trap, det, trace.dt, seed);
  TimeTrace out;
  out.dt = trace.dt;
  out.unit = SignalUnit::volts;
  out.seed = seed;
  out.config_digest = trace.config_digest;
  auto& v = out.position.z();
  v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = has_xy ? trace.position.x()[i] : 0.0;
    const double y = has_xy ? trace.position.y()[i] : 0.0;
    v[i] = model.sample(x, y, trace.position.z()[i]);
  }
  return out;
}

DetectedPower detected_power_chain(const ParticleSpec& particle, const TrapSpec& trap,
                                   const DetectorSpec& det, double x0, double y0) {
  particle.validate();
  trap.validate();
  det.validate();
  if (!(x0 >= 0.0) || !(y0 >= 0.0)) throw InputError("detected_power_chain: x0, y0 must be >= 0");
  const double r = particle.radius;
  const double n2 = particle.refractive_index * particle.refractive_index;
  const double cm = (n2 - 1.0) / (n2 + 2.0);
  const double lam = trap.wavelength;
  DetectedPower out{};
  out.cross_section = 2.0 * std::pow(c::pi, 5) / 3.0 * std::pow(2.0 * r, 6) / std::pow(lam, 4) *
                      cm * cm;
  // Both patches taken as areas: pi x0 y0 over 2 pi w0^2.
  const double focus_area = 2.0 * c::pi * trap.waist * trap.waist;
  out.area_fraction = c::pi * x0 * y0 / focus_area;
  out.scattered = out.cross_section / (2.0 * c::pi * r * r) * trap.power * out.area_fraction;
  out.photon_rate = out.scattered / (c::hbar * 2.0 * c::pi * c::speed_of_light / lam);
  out.detected = det.quantum_efficiency * det.transmission * out.scattered;
  out.signal_volts = out.detected * det.responsivity * det.transimpedance;
  return out;
}

WavelengthScan synthesize_wavelength_scan(TrapSpec trap, const DetectorSpec& det, double z0,
                                          double omega0, std::span<const double> wavelengths,
                                          const ScanSynthesis& opts) {
  if (!(z0 >= 0.0)) throw InputError("wavelength scan: z0 must be >= 0");
  if (!(omega0 > 0.0)) throw InputError("wavelength scan: omega0 must be > 0");
  if (opts.cycles < 1 || opts.samples_per_cycle < 8)
    throw InputError("wavelength scan: need >= 1 cycle and >= 8 samples per cycle");
  const int n = opts.cycles * opts.samples_per_cycle;
  const double dt = 2.0 * c::pi / omega0 / opts.samples_per_cycle;
  DetectorSpec d = det;
  d.add_noise = det.add_noise && opts.add_noise;

  WavelengthScan scan;
  scan.wavelength.assign(wavelengths.begin(), wavelengths.end());
  scan.first.reserve(wavelengths.size());
  scan.second.reserve(wavelengths.size());
  std::uint64_t stream = 0;
  for (double lam : wavelengths) {
    trap.wavelength = lam;
    DetectorModel model(trap, d, dt, opts.seed + 7919 * stream++);
    std::complex<double> l1{}, l2{};
    for (int i = 0; i < n; ++i) {
      const double ph = omega0 * dt * i;
      const double v = model.sample(0.0, 0.0, z0 * std::sin(ph));
      l1 += v * std::polar(1.0, -ph);
      l2 += v * std::polar(1.0, -2.0 * ph);
    }
    scan.first.push_back(2.0 * std::abs(l1) / n);
    scan.second.push_back(2.0 * std::abs(l2) / n);
  }
  return scan;
}

std::vector<double> wavelength_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw InputError("wavelength_grid: bad range");
  const auto count = static_cast<std::size_t>(std::llround((stop - start) / step)) + 1;
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = start + step * static_cast<double>(i);
  return g;
}

}  // namespace levtwin
