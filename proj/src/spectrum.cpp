#include "levtwin/spectrum.hpp"

#include <cmath>

#include "levtwin/common.hpp"
#include "levtwin/constants.hpp"

namespace levtwin {

std::string signal_unit_name(SignalUnit u) { return u == SignalUnit::meters ? "m" : "V"; }

void Spectrum::validate() const {
  if (frequency.size() != density.size())
    throw InputError("spectrum grid and values differ in length");
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (!(density[i] >= 0.0)) throw InputError("spectrum has a negative or NaN value");
    if (i > 0 && !(frequency[i] > frequency[i - 1]))
      throw InputError("spectrum grid is not strictly increasing");
  }
}

Spectrum to_two_sided_angular(const Spectrum& s) {
  if (s.convention == SpectrumConvention::two_sided_angular) return s;
  Spectrum out = s;
  out.convention = SpectrumConvention::two_sided_angular;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.frequency[i] = 2.0 * constants::pi * s.frequency[i];
    out.density[i] = s.density[i] / (4.0 * constants::pi);
  }
  return out;
}

Spectrum to_one_sided_hertz(const Spectrum& s) {
  if (s.convention == SpectrumConvention::one_sided_hertz) return s;
  Spectrum out;
  out.convention = SpectrumConvention::one_sided_hertz;
  out.unit = s.unit;
  out.meta = s.meta;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.frequency[i] < 0.0) continue;
    out.frequency.push_back(s.frequency[i] / (2.0 * constants::pi));
    out.density.push_back(s.density[i] * 4.0 * constants::pi);
  }
  return out;
}

}  // namespace levtwin
