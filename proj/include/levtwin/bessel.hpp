#pragma once

namespace levtwin {

/// Bessel function of the first kind J_n(x) for integer order n >= 0 by its
/// power series. Accurate to ~1e-14 absolute for |x| <= 5; inputs beyond
/// |x| = 20 are rejected because cancellation ruins the series.
double bessel_j(int n, double x);

/// Solves J2(beta)/J1(beta) = ratio for beta on (0, 3.8); the ratio is
/// monotone there. Returns 0 for ratio <= 0.
double invert_bessel_ratio(double ratio);

}  // namespace levtwin
