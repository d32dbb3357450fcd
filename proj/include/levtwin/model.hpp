#pragma once

#include "levtwin/common.hpp"

namespace levtwin {

/// Dielectric sphere. Defaults are amorphous silica at 1550 nm.
struct ParticleSpec {
  double radius = 75e-9;          // m
  double density = 1850.0;        // kg/m^3
  double refractive_index = 1.45;

  double volume() const;
  double mass() const;
  void validate() const;
};

struct TrapSpec {
  double power = 0.5;             // W
  double wavelength = 1550e-9;    // m
  double waist = 1.0e-6;          // focal waist w_f, m
  double focal_length = 3.1e-3;   // m
  double mirror_radius = 12.7e-3; // r_0, m

  double wavenumber() const;      // 2 pi / lambda
  double rayleigh_range() const;  // pi w_f^2 / lambda
  void validate() const;
};

struct GasSpec {
  double pressure = 7.0;          // Pa
  double temperature = 300.0;     // K
  double viscosity = 18.6e-6;     // Pa s (air)
  double molecule_diameter = 0.37e-9;  // m (air)

  double mean_free_path() const;  // k_B T / (sqrt2 pi d^2 p)
  void validate() const;
};

/// Stiffness ratio k_y / k_x from a polarisation asymmetry of the focus.
struct PolarizationSplit {
  double xy_asymmetry = 1.0;
};

/// Clausius-Mossotti point-dipole polarisability, C m^2 / V.
double polarizability(const ParticleSpec& particle);

/// Optical spring constants (N/m). The split scales k_y only.
Axis3<double> spring_constants(const TrapSpec& trap, const ParticleSpec& particle,
                               PolarizationSplit split = {});

/// Trap angular frequencies sqrt(k/m), rad/s.
Axis3<double> trap_frequencies(const TrapSpec& trap, const ParticleSpec& particle,
                               PolarizationSplit split = {});

struct GasDamping {
  double mean_free_path;  // m
  double knudsen;         // l / r
  double slip_correction; // c_k
  double rate;            // Gamma_0, s^-1
};

/// Collisional damping in the free-molecular/transition regime.
GasDamping gas_damping(const GasSpec& gas, const ParticleSpec& particle);

/// First-order (large Kn) inverse of gas_damping.
double radius_from_damping(double pressure, double damping, const GasSpec& gas,
                           double density);

/// Pressure (Pa) at which gas_damping reaches `damping`; bisection on the
/// monotone forward model.
double pressure_for_damping(double damping, GasSpec gas, const ParticleSpec& particle);

struct MirrorAperture {
  double half_angle;     // rad, in [0, pi]
  double literal_na;     // 1 - cos(theta), may exceed 1 past r0 = 2f
  double effective_na;   // literal_na clamped to <= 1
};

/// Acceptance cone of a paraboloid with focal length f and rim radius r0.
MirrorAperture mirror_na(double focal_length, double mirror_radius);

}  // namespace levtwin
