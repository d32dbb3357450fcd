#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace levtwin {

/// How a density is normalised.
///  - one_sided_hertz: integral over f >= 0 (Hz) gives the variance (Welch output).
///  - two_sided_angular: integral over all w (rad/s) gives the variance. This is
///    the Lorentzian convention used for fitting: S(w) = A / ((B^2-w^2)^2 + w^2 C^2).
enum class SpectrumConvention { one_sided_hertz, two_sided_angular };

enum class SignalUnit { meters, volts };

std::string signal_unit_name(SignalUnit u);

struct WelchMeta {
  std::size_t segment_length = 0;
  double overlap = 0.0;
  std::size_t averages = 0;
  std::string window;
};

struct Spectrum {
  std::vector<double> frequency;  // Hz or rad/s per convention
  std::vector<double> density;    // unit^2 / Hz or unit^2 s / rad
  SpectrumConvention convention = SpectrumConvention::two_sided_angular;
  SignalUnit unit = SignalUnit::meters;
  WelchMeta meta;

  std::size_t size() const { return frequency.size(); }
  void validate() const;  // grid strictly increasing, values non-negative
};

/// Converts a one-sided Hz density into the two-sided angular convention
/// (S_w(w) = S_f(f) / 4 pi on w = 2 pi f). Identity for already-angular input.
Spectrum to_two_sided_angular(const Spectrum& s);

/// Inverse of to_two_sided_angular on the non-negative half axis.
Spectrum to_one_sided_hertz(const Spectrum& s);

}  // namespace levtwin
