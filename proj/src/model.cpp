#include "levtwin/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "levtwin/constants.hpp"

namespace levtwin {

namespace c = constants;

Axis parse_axis(std::string_view name) {
  if (name == "x") return Axis::x;
  if (name == "y") return Axis::y;
  if (name == "z") return Axis::z;
  throw InputError("unknown axis '" + std::string(name) + "'");
}

double ParticleSpec::volume() const { return 4.0 / 3.0 * c::pi * radius * radius * radius; }

double ParticleSpec::mass() const { return volume() * density; }

void ParticleSpec::validate() const {
  if (!(radius > 0.0)) throw InputError("particle radius must be > 0");
  if (!(density > 0.0)) throw InputError("particle density must be > 0");
  if (!(refractive_index > 1.0)) throw InputError("refractive index must be > 1");
}

double TrapSpec::wavenumber() const { return 2.0 * c::pi / wavelength; }

double TrapSpec::rayleigh_range() const { return c::pi * waist * waist / wavelength; }

void TrapSpec::validate() const {
  if (!(power >= 0.0)) throw InputError("trap power must be >= 0");
  if (!(wavelength > 0.0)) throw InputError("wavelength must be > 0");
  if (!(waist > 0.0)) throw InputError("focal waist must be > 0");
  if (!(focal_length > 0.0)) throw InputError("focal length must be > 0");
  if (!(mirror_radius > 0.0)) throw InputError("mirror radius must be > 0");
}

double GasSpec::mean_free_path() const {
  return c::boltzmann * temperature /
         (std::numbers::sqrt2 * c::pi * molecule_diameter * molecule_diameter * pressure);
}

void GasSpec::validate() const {
  if (!(pressure > 0.0)) throw InputError("gas pressure must be > 0");
  if (!(temperature >= 0.0)) throw InputError("gas temperature must be >= 0");
  if (!(viscosity > 0.0)) throw InputError("gas viscosity must be > 0");
  if (!(molecule_diameter > 0.0)) throw InputError("molecule diameter must be > 0");
}

double polarizability(const ParticleSpec& particle) {
  particle.validate();
  const double n2 = particle.refractive_index * particle.refractive_index;
  const double r = particle.radius;
  return 4.0 * c::pi * c::vacuum_permittivity * r * r * r * (n2 - 1.0) / (n2 + 2.0);
}

Axis3<double> spring_constants(const TrapSpec& trap, const ParticleSpec& particle,
                               PolarizationSplit split) {
  trap.validate();
  if (!(split.xy_asymmetry >= 1.0)) throw InputError("xy asymmetry factor must be >= 1");
  const double alpha = polarizability(particle);
  const double w2 = trap.waist * trap.waist;
  const double w4 = w2 * w2;
  const double lam2 = trap.wavelength * trap.wavelength;
  const double denom = c::speed_of_light * c::pi * c::vacuum_permittivity;

  const double kxy = 8.0 * alpha * trap.power / (denom * w4);
  const double kz = 2.0 * alpha * trap.power * lam2 / (denom * w4 * w2);
  return Axis3<double>{{kxy, kxy * split.xy_asymmetry, kz}};
}

Axis3<double> trap_frequencies(const TrapSpec& trap, const ParticleSpec& particle,
                               PolarizationSplit split) {
  const auto k = spring_constants(trap, particle, split);
  const double m = particle.mass();
  return Axis3<double>{{std::sqrt(k.x() / m), std::sqrt(k.y() / m), std::sqrt(k.z() / m)}};
}

GasDamping gas_damping(const GasSpec& gas, const ParticleSpec& particle) {
  gas.validate();
  particle.validate();
  GasDamping out{};
  out.mean_free_path = gas.mean_free_path();
  out.knudsen = out.mean_free_path / particle.radius;
  const double kn = out.knudsen;
  out.slip_correction = 0.31 * kn / (0.785 + 1.152 * kn + kn * kn);
  out.rate = 6.0 * c::pi * gas.viscosity * particle.radius / particle.mass() *
             0.619 / (0.619 + kn) * (1.0 + out.slip_correction);
  return out;
}

double radius_from_damping(double pressure, double damping, const GasSpec& gas,
                           double density) {
  if (damping == 0.0) throw InputError("radius_from_damping: division by zero damping");
  if (!(damping > 0.0)) throw InputError("radius_from_damping: damping must be > 0");
  if (!(pressure > 0.0)) throw InputError("radius_from_damping: pressure must be > 0");
  if (!(density > 0.0)) throw InputError("radius_from_damping: density must be > 0");
  const double d2 = gas.molecule_diameter * gas.molecule_diameter;
  return 0.619 * 9.0 * c::pi * gas.viscosity * d2 /
         (std::numbers::sqrt2 * density * c::boltzmann * gas.temperature) * (pressure / damping);
}

double pressure_for_damping(double damping, GasSpec gas, const ParticleSpec& particle) {
  if (!(damping > 0.0)) throw InputError("pressure_for_damping: damping must be > 0");
  double lo = 1e-12, hi = 1e7;
  auto rate_at = [&](double p) {
    gas.pressure = p;
    return gas_damping(gas, particle).rate;
  };
  if (rate_at(lo) > damping || rate_at(hi) < damping)
    throw InputError("pressure_for_damping: damping outside supported pressure range");
  // Bisection in log p; the forward model is monotone in p.
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (rate_at(mid) < damping ? lo : hi) = mid;
    if (hi / lo - 1.0 < 1e-15) break;
  }
  return std::sqrt(lo * hi);
}

MirrorAperture mirror_na(double focal_length, double mirror_radius) {
  if (!(focal_length > 0.0)) throw InputError("mirror_na: focal length must be > 0");
  if (!(mirror_radius > 0.0)) throw InputError("mirror_na: rim radius must be > 0");
  // atan2 selects theta = pi - atan(r0/|f - z0|) once the rim rises above the focus.
  const double axial = focal_length - mirror_radius * mirror_radius / (4.0 * focal_length);
  MirrorAperture out{};
  out.half_angle = std::atan2(mirror_radius, axial);
  out.literal_na = 1.0 - std::cos(out.half_angle);
  out.effective_na = std::min(out.literal_na, 1.0);
  return out;
}

}  // namespace levtwin
