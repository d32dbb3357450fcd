#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "levtwin/analysis.hpp"
#include "levtwin/constants.hpp"
#include "levtwin/detector.hpp"

using namespace levtwin;
namespace c = levtwin::constants;

namespace {

std::vector<double> white(std::size_t n, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

double variance(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / x.size();
}

// Noiseless samples on a uniform angular grid around the peak.
Spectrum analytic_line(double A, double B, double C, double spacing, std::size_t half) {
  Spectrum s;
  s.convention = SpectrumConvention::two_sided_angular;
  for (std::size_t i = 0; i <= 2 * half; ++i) {
    const double w = B + (static_cast<double>(i) - static_cast<double>(half)) * spacing;
    if (w <= 0.0) continue;
    s.frequency.push_back(w);
    s.density.push_back(lorentzian(A, B, C, w));
  }
  return s;
}

}  // namespace

TEST_CASE("Welch sums to the trace variance") {
  const auto x = white(1 << 18, 1.7, 3);
  const double dt = 1e-6;
  const Spectrum s = welch_psd(x, dt);
  const double df = s.frequency[1] - s.frequency[0];
  double area = 0.0;
  for (double d : s.density) area += d * df;
  CHECK(area == doctest::Approx(variance(x)).epsilon(0.01));
  CHECK(s.meta.averages >= 8);
  CHECK(s.meta.window == "hann");
}

TEST_CASE("Welch line power of a sinusoid") {
  const double dt = 1e-5, a = 0.3, f = 1234.5;
  std::vector<double> x(1 << 17);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * std::sin(2 * c::pi * f * i * dt + 0.2);
  const Spectrum s = welch_psd(x, dt, {4096, 0.5, true});
  const double df = s.frequency[1];
  const auto k = static_cast<std::size_t>(std::llround(f / df));
  double p = 0.0;
  for (std::size_t j = k - 6; j <= k + 6; ++j) p += s.density[j] * df;
  CHECK(p == doctest::Approx(a * a / 2).epsilon(0.02));
}

TEST_CASE("Welch density of white noise") {
  const double dt = 2e-6, sd = 0.5;
  const auto x = white(1 << 19, sd, 8);
  const Spectrum s = welch_psd(x, dt, {1024, 0.5, true});
  double mean = 0.0;
  for (std::size_t k = 1; k + 1 < s.size(); ++k) mean += s.density[k];
  mean /= static_cast<double>(s.size() - 2);
  CHECK(mean == doctest::Approx(2 * sd * sd * dt).epsilon(0.02));
}

TEST_CASE("Welch rejects short traces and bad settings") {
  std::vector<double> x(100, 1.0);
  CHECK_THROWS_AS(welch_psd(x, 1e-3, {64, 0.5, true}), InputError);
  CHECK_THROWS_AS(welch_psd(x, 0.0), InputError);
  CHECK_THROWS_AS(welch_psd(x, 1e-3, {16, 1.0, true}), InputError);
}

TEST_CASE("Welch of a simulated thermal trace matches the analytic line") {
  MotionModel m;
  m.mass = 3e-18;
  const double w0 = 2 * c::pi * 20e3;
  m.stiffness = Axis3<double>::uniform(m.mass * w0 * w0);
  m.damping = 2 * c::pi * 500.0;
  m.temperature = 300.0;
  SimControl sc;
  sc.dt = 5e-7;
  sc.decimation = 2;
  sc.duration = 2.0;
  sc.seed = 77;
  const TimeTrace t = simulate(m, sc);
  const Spectrum est = to_two_sided_angular(welch_psd(t, Axis::x, {1 << 14, 0.5, true}));
  std::vector<double> grid;
  std::vector<double> vals;
  for (std::size_t k = 0; k < est.size(); ++k) {
    if (std::abs(est.frequency[k] - w0) > 10 * m.damping) continue;
    grid.push_back(est.frequency[k]);
    vals.push_back(est.density[k]);
  }
  const Spectrum ref = analytic_psd(m.mass, m.temperature, m.damping, 0.0, w0, 0.0, grid);
  // Hann with 50 % overlap keeps close to 2 degrees of freedom per segment.
  const double nu = 1.9 * static_cast<double>(est.meta.averages);
  const double sd = std::sqrt(2.0 / nu);
  double mean = 0.0;
  std::size_t outside = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double r = vals[k] / ref.density[k];
    mean += r;
    if (std::abs(r - 1.0) > 4 * sd) ++outside;
  }
  mean /= static_cast<double>(grid.size());
  CHECK(std::abs(mean - 1.0) < 4 * sd / std::sqrt(static_cast<double>(grid.size())) + 0.01);
  CHECK(outside <= grid.size() / 100 + 1);
}

TEST_CASE("Lorentzian fit recovers noiseless parameters") {
  struct Case {
    double A, B, C;
  };
  for (const Case k : {Case{1e-3, 2 * c::pi * 88e3, 2 * c::pi * 60.0},
                       Case{4e7, 2 * c::pi * 150e3, 400.0},
                       Case{2.5, 2 * c::pi * 5e3, 2 * c::pi * 800.0}}) {
    const Spectrum s = analytic_line(k.A, k.B, k.C, k.C / 7.0, 300);
    const LorentzFit f = fit_lorentzian(s);
    CHECK(f.converged);
    CHECK(f.A == doctest::Approx(k.A).epsilon(1e-6));
    CHECK(f.B == doctest::Approx(k.B).epsilon(1e-6));
    CHECK(f.C == doctest::Approx(k.C).epsilon(1e-6));
    CHECK(quality_factor(f) == f.B / f.C);
  }
}

TEST_CASE("Lorentzian fit accepts Hz spectra and reports covariance") {
  const double A = 1e-2, B = 2 * c::pi * 40e3, C = 2 * c::pi * 100.0;
  const Spectrum ang = analytic_line(A, B, C, C / 6.0, 200);
  const Spectrum hz = to_one_sided_hertz(ang);
  const LorentzFit f = fit_lorentzian(hz);
  CHECK(f.B == doctest::Approx(B).epsilon(1e-6));
  CHECK(f.C == doctest::Approx(C).epsilon(1e-6));
  CHECK(f.sigma(1) >= 0.0);
  CHECK(f.variance() == doctest::Approx(c::pi * f.A / (f.B * f.B * f.C)));
}

TEST_CASE("Lorentzian fit on estimator noise, 100 random draws") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int pass = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const double B = 2 * c::pi * std::exp(std::log(1e4) + u(rng) * std::log(30.0));
    const double C = B * std::exp(std::log(1e-4) + u(rng) * std::log(100.0));
    const double A = std::exp(std::log(1e-6) + u(rng) * std::log(1e6));
    const int K = 50 + static_cast<int>(u(rng) * 150);
    std::gamma_distribution<double> chi(K, 1.0 / K);
    Spectrum s = analytic_line(A, B, C, C / 5.0, 150);
    for (auto& d : s.density) d *= chi(rng);
    const LorentzFit f = fit_lorentzian(s);
    const bool ok = std::abs(f.B / B - 1) < 1e-3 && std::abs(f.C / C - 1) < 0.05 &&
                    std::abs(f.A / A - 1) < 0.05;
    if (ok) ++pass;
  }
  CHECK(pass >= 95);
}

TEST_CASE("Lorentzian fit input errors") {
  Spectrum s;
  s.convention = SpectrumConvention::two_sided_angular;
  s.frequency = {1.0, 2.0, 3.0};
  s.density = {1.0, 2.0, 1.0};
  CHECK_THROWS_AS(fit_lorentzian(s), InputError);
  s.density = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(fit_lorentzian(s), InputError);
  LorentzFit zero;
  CHECK_THROWS_AS(quality_factor(zero), InputError);
}

TEST_CASE("quality factor examples") {
  LorentzFit f;
  f.B = 2 * c::pi * 88e3;
  f.C = 2 * c::pi * 2e-3;
  CHECK(quality_factor(f) == doctest::Approx(4.4e7).epsilon(1e-12));
  f.C = f.B;
  CHECK(quality_factor(f) == 1.0);
}

TEST_CASE("reference parameters from a synthetic fit") {
  GasSpec gas;
  gas.pressure = 7e-2 * 100.0;
  ParticleSpec p;
  p.radius = 75e-9;
  const GasDamping gd = gas_damping(gas, p);
  const double m = p.mass(), kt = c::boltzmann * 300.0, g = 3.2e6;
  LorentzFit f;
  f.B = 2 * c::pi * 150e3;
  f.C = gd.rate;
  f.A = g * g * kt * f.C / (c::pi * m);
  const ReferenceParams r = extract_reference_params(f, gas, 300.0, p.density, 70e-9);
  REQUIRE(r.radius);
  // The radius inversion is first order in 1/Kn, about 1e4 here.
  CHECK(*r.radius == doctest::Approx(p.radius).epsilon(1e-3));
  CHECK(*r.mass == doctest::Approx(m).epsilon(3e-3));
  CHECK(*r.gamma == doctest::Approx(g).epsilon(2e-3));
  CHECK(*r.resolution == doctest::Approx(70e-9 / *r.gamma).epsilon(1e-12));

  CHECK(*extract_reference_params(f, gas, 300.0, p.density, 0.0).resolution == 0.0);
  const ReferenceParams none = extract_reference_params(f, std::nullopt, 300.0, p.density, 0.0);
  CHECK_FALSE(none.radius);
  CHECK_FALSE(none.mass);
  CHECK_FALSE(none.gamma);
  CHECK_FALSE(none.note.empty());
  CHECK_THROWS_AS(extract_reference_params(f, gas, 0.0, p.density, 0.0), InputError);
}

TEST_CASE("temperature from linewidths") {
  LorentzFit ref, cooled;
  ref.C = 400.0;
  ref.covariance[8] = 16.0;
  cooled.C = 400.0;
  CHECK(extract_temperature(cooled, ref, 300.0).temperature == doctest::Approx(300.0));
  CHECK_FALSE(extract_temperature(cooled, ref, 300.0).heating);

  cooled.C = 400.0 * 300.0 / 0.222;
  cooled.covariance[8] = std::pow(0.01 * cooled.C, 2);
  const TemperatureEstimate t = extract_temperature(cooled, ref, 300.0);
  CHECK(t.temperature == doctest::Approx(0.222).epsilon(1e-12));
  CHECK(t.temperature < 300.0);
  CHECK(t.sigma == doctest::Approx(0.222 * std::hypot(0.01, 0.01)).epsilon(1e-9));

  cooled.C = 200.0;
  const TemperatureEstimate h = extract_temperature(cooled, ref, 300.0);
  CHECK(h.heating);
  CHECK(h.temperature == doctest::Approx(600.0));
}

TEST_CASE("equipartition temperature") {
  const double m = 2e-18, w = 2 * c::pi * 1e5, kt = c::boltzmann * 300.0;
  const double a = std::sqrt(2 * kt / (m * w * w));
  std::vector<double> x(10000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * std::sin(2 * c::pi * i / 100.0);
  CHECK(equipartition_temperature(x, m, w) == doctest::Approx(300.0).epsilon(1e-9));
  CHECK_THROWS_AS(equipartition_temperature(std::vector<double>{}, m, w), InputError);
}

TEST_CASE("Allan deviation of a constant is zero") {
  std::vector<double> x(5000, 3.25);
  const auto taus = log_grid(1e-3, 1.0, 10);
  const AllanCurve a = allan_deviation(x, 1e-3, taus);
  REQUIRE(!a.sigma.empty());
  for (double s : a.sigma) CHECK(s == 0.0);
  for (std::size_t n : a.segments) CHECK(n >= 2);
  for (std::size_t i = 1; i < a.tau.size(); ++i) CHECK(a.tau[i] > a.tau[i - 1]);
}

TEST_CASE("Allan deviation of white noise falls as tau^-1/2") {
  const double dt = 1e-4;
  const auto x = white(1 << 20, 1.0, 12);
  const auto taus = log_grid(1e-3, 1.0, 16);
  const AllanCurve a = allan_deviation(x, dt, taus);
  CHECK(loglog_slope(a.tau, a.sigma) == doctest::Approx(-0.5).epsilon(0.1));
  // Absolute level: sigma(tau) = sd sqrt(dt / tau).
  CHECK(a.sigma.front() == doctest::Approx(std::sqrt(dt / a.tau.front())).epsilon(0.05));
}

TEST_CASE("Allan deviation of a sinusoid nulls at whole periods") {
  const double dt = 1e-4, period = 0.01;
  std::vector<double> x(200000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * c::pi * i * dt / period + 0.3);
  const std::vector<double> taus = {period, 1.5 * period, 2 * period, 2.5 * period, 3 * period};
  const AllanCurve a = allan_deviation(x, dt, taus);
  REQUIRE(a.sigma.size() == 5);
  for (std::size_t i : {0, 2, 4}) CHECK(a.sigma[i] < 1e-9);
  for (std::size_t i : {1, 3}) CHECK(a.sigma[i] > 0.05);
}

TEST_CASE("Allan deviation rejects taus without two segments") {
  std::vector<double> x(100, 0.0);
  const std::vector<double> taus = {1e-3, 0.05, 0.08, 1e-9};
  const AllanCurve a = allan_deviation(x, 1e-3, taus);
  CHECK(a.tau.size() == 2);
  CHECK(a.rejected.size() == 2);
  CHECK_THROWS_AS(allan_deviation(x, 0.0, taus), InputError);
}

TEST_CASE("log grid and log-log slope") {
  const auto g = log_grid(1e-2, 1e2, 5);
  REQUIRE(g.size() == 5);
  CHECK(g[2] == doctest::Approx(1.0));
  CHECK(g.back() == doctest::Approx(1e2));
  std::vector<double> y;
  for (double x : g) y.push_back(7 * std::pow(x, 1.3));
  CHECK(loglog_slope(g, y) == doctest::Approx(1.3).epsilon(1e-12));
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), InputError);
  CHECK_THROWS_AS(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), InputError);
}

TEST_CASE("wavelength scan round trip over 20 to 200 nm") {
  TrapSpec trap;
  DetectorSpec det;
  const double w0 = 2 * c::pi * 150e3;
  const auto grid = wavelength_grid(1545e-9, 1555e-9, 5e-12);
  ScanInputs in;
  in.trap = trap;
  in.omega0 = w0;
  in.nep = det.nep_exp;
  for (double z0 : {20e-9, 50e-9, 100e-9, 150e-9, 200e-9}) {
    ScanSynthesis opts;
    opts.seed = static_cast<std::uint64_t>(z0 * 1e10);
    const WavelengthScan scan = synthesize_wavelength_scan(trap, det, z0, w0, grid, opts);
    const ScanCalibration cal = wavelength_scan_calibration(scan, in);
    REQUIRE(cal.resolved);
    CHECK(cal.z0 == doctest::Approx(z0).epsilon(0.05));
    const double m = c::boltzmann * in.temperature / (w0 * w0 * cal.z0 * cal.z0);
    CHECK(cal.mass == doctest::Approx(m).epsilon(1e-12));
    CHECK(cal.radius == doctest::Approx(std::cbrt(3 * m / (4 * c::pi * in.density))).epsilon(1e-12));
    CHECK(cal.gamma == doctest::Approx(cal.first_scale / cal.z0).epsilon(1e-12));
    CHECK(cal.beta_small == doctest::Approx(cal.beta).epsilon(0.05));
  }
}

TEST_CASE("wavelength scan with no second harmonic is unresolved") {
  TrapSpec trap;
  DetectorSpec det;
  const double w0 = 2 * c::pi * 150e3;
  const auto grid = wavelength_grid(1545e-9, 1555e-9, 5e-12);
  WavelengthScan scan = synthesize_wavelength_scan(trap, det, 100e-9, w0, grid);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1e-9);
  for (auto& v : scan.second) v = std::abs(g(rng));
  ScanInputs in;
  in.trap = trap;
  in.omega0 = w0;
  const ScanCalibration cal = wavelength_scan_calibration(scan, in);
  CHECK_FALSE(cal.resolved);
  CHECK(cal.note.find("unresolvable") != std::string::npos);
}

TEST_CASE("wavelength scan shorter than one theta period is rejected") {
  TrapSpec trap;
  DetectorSpec det;
  const double w0 = 2 * c::pi * 150e3;
  const auto grid = wavelength_grid(1550e-9, 1550.1e-9, 5e-12);
  const WavelengthScan scan = synthesize_wavelength_scan(trap, det, 100e-9, w0, grid);
  ScanInputs in;
  in.trap = trap;
  in.omega0 = w0;
  CHECK_THROWS_AS(wavelength_scan_calibration(scan, in), InputError);
}

TEST_CASE("quantum limits scale and stay non-negative") {
  QuantumInputs in;
  in.omega0 = 2 * c::pi * 100e3;
  in.temperature = 1e-3;
  in.extra_damping = 2 * c::pi * 500.0;
  const QuantumMetrics a = quantum_limits(in);
  CHECK(a.ground_size == doctest::Approx(std::sqrt(c::hbar / (in.particle.mass() * in.omega0))));
  CHECK(a.zero_point == doctest::Approx(a.ground_size * (std::sqrt(2.0) - 1.0)));
  CHECK(a.occupancy == doctest::Approx(c::boltzmann * 1e-3 / (c::hbar * in.omega0)));
  CHECK(a.scattered_power >= 0.0);
  CHECK(a.recoil_rate >= 0.0);
  CHECK(a.phonon_limit == doctest::Approx(a.recoil_rate / in.extra_damping));

  in.omega0 *= 4.0;
  CHECK(quantum_limits(in).ground_size == doctest::Approx(0.5 * a.ground_size));
  in.omega0 /= 4.0;
  in.particle.radius *= std::cbrt(4.0);
  CHECK(quantum_limits(in).ground_size == doctest::Approx(0.5 * a.ground_size));

  in.extra_damping = 0.0;
  CHECK(quantum_limits(in).phonon_limit == 0.0);
  in.level = -1;
  CHECK_THROWS_AS(quantum_limits(in), InputError);
}

TEST_CASE("recoil rate against direct arithmetic") {
  const long double P = 3.7e-9L, m = 2.9e-18L, lam = 1550e-9L, w = 2 * 3.14159265358979323846L * 1e5L;
  const long double cl = 299792458.0L, pi = 3.14159265358979323846L;
  const long double want = P / (5.0L * m * cl * cl) * (2.0L * pi * cl / (lam * w));
  const double got = recoil_rate(3.7e-9, 2.9e-18, 1550e-9, 2 * c::pi * 1e5);
  CHECK(std::abs(got / static_cast<double>(want) - 1.0) < 1e-12);
  CHECK_THROWS_AS(recoil_rate(1e-9, 0.0, 1550e-9, 1e5), InputError);
}

TEST_CASE("phase law fit recovers eta and offset") {
  const double t0 = 300.0, g0 = 2 * c::pi * 10.0, w0 = 2 * c::pi * 40e3;
  for (double offset : {0.0, 0.2, -0.3}) {
    const double eta = 0.6 * 2 * g0 / w0;
    std::vector<double> phi, temp;
    for (int i = 0; i < 12; ++i) {
      const double p = c::pi * i / 12.0;
      phi.push_back(p);
      temp.push_back(t0 / (1 - eta * w0 * std::sin(2 * (p - offset)) / (2 * g0)));
    }
    const PhaseLawFit f = fit_phase_law(phi, temp, t0, g0, w0);
    CHECK(f.converged);
    CHECK(f.eta == doctest::Approx(eta).epsilon(1e-6));
    CHECK(std::abs(std::remainder(f.phase_offset - offset, c::pi)) < 1e-6);
    CHECK(f.residual < 1e-9);
  }
  const std::vector<double> two = {0.0, 1.0};
  CHECK_THROWS_AS(fit_phase_law(two, two, 300.0, 1.0, 1.0), InputError);
}
