#include "levtwin/bessel.hpp"

#include <cmath>

#include "levtwin/common.hpp"

namespace levtwin {

double bessel_j(int n, double x) {
  if (n < 0) throw InputError("bessel_j: order must be >= 0");
  if (std::abs(x) > 20.0) throw InputError("bessel_j: |x| > 20 outside series range");
  const double half = 0.5 * x;
  // Leading term (x/2)^n / n!
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= half / k;
  double sum = term;
  const double h2 = half * half;
  for (int k = 1; k < 200; ++k) {
    term *= -h2 / (static_cast<double>(k) * static_cast<double>(k + n));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && k > half) break;
  }
  return sum;
}

double invert_bessel_ratio(double ratio) {
  if (!(ratio > 0.0)) return 0.0;
  auto f = [](double b) { return bessel_j(2, b) / bessel_j(1, b); };
  double lo = 1e-12, hi = 3.8;
  if (ratio >= f(hi)) throw InputError("invert_bessel_ratio: ratio beyond invertible range");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < ratio ? lo : hi) = mid;
    if (hi - lo < 1e-15) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace levtwin
