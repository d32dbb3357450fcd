#pragma once

#include <numbers>

// CODATA 2018 exact / recommended values, SI units.
namespace levtwin::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double boltzmann = 1.380649e-23;         // J/K
inline constexpr double hbar = 1.054571817e-34;           // J s
inline constexpr double speed_of_light = 299792458.0;     // m/s
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m

inline constexpr double pascal_per_mbar = 100.0;

}  // namespace levtwin::constants
