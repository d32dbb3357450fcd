#include "levtwin/analysis.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <boost/math/special_functions/digamma.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "levtwin/bessel.hpp"
#include "levtwin/constants.hpp"

namespace levtwin {

namespace c = constants;

namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void run() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

bool lm_converged(Eigen::LevenbergMarquardtSpace::Status st) {
  using namespace Eigen::LevenbergMarquardtSpace;
  switch (st) {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
      return true;
    default:
      return false;
  }
}

// Residuals ln S_i - ln model_i over parameters (ln A, ln B, ln C).
struct LogLorentzFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>& w;
  const std::vector<double>& ls;
  LogLorentzFunctor(const std::vector<double>& omega, const std::vector<double>& log_s)
      : DenseFunctor<double>(3, static_cast<int>(omega.size())), w(omega), ls(log_s) {}

  int operator()(const InputType& p, ValueType& f) const {
    const double B = std::exp(p[1]), C = std::exp(p[2]);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double x = w[i], d = B * B - x * x;
      f[i] = ls[i] - (p[0] - std::log(d * d + x * x * C * C));
    }
    return 0;
  }
  int df(const InputType& p, JacobianType& J) const {
    const double B = std::exp(p[1]), C = std::exp(p[2]);
    for (Eigen::Index i = 0; i < J.rows(); ++i) {
      const double x = w[i], d = B * B - x * x;
      const double D = d * d + x * x * C * C;
      J(i, 0) = -1.0;
      J(i, 1) = 4.0 * B * B * d / D;
      J(i, 2) = 2.0 * x * x * C * C / D;
    }
    return 0;
  }
};

struct PhaseLawFunctor : Eigen::DenseFunctor<double> {
  std::span<const double> phi, lt;
  double lt0;
  PhaseLawFunctor(std::span<const double> p, std::span<const double> log_t, double log_t0)
      : DenseFunctor<double>(2, static_cast<int>(p.size())), phi(p), lt(log_t), lt0(log_t0) {}

  int operator()(const InputType& q, ValueType& f) const {
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double den = 1.0 - q[0] * std::sin(2.0 * (phi[i] - q[1]));
      f[i] = den > 0.0 ? lt[i] - lt0 + std::log(den) : 1e3 * (1.0 - den);
    }
    return 0;
  }
  int df(const InputType& q, JacobianType& J) const {
    for (Eigen::Index i = 0; i < J.rows(); ++i) {
      const double u = 2.0 * (phi[i] - q[1]);
      const double den = std::max(1.0 - q[0] * std::sin(u), 1e-12);
      J(i, 0) = -std::sin(u) / den;
      J(i, 1) = 2.0 * q[0] * std::cos(u) / den;
    }
    return 0;
  }
};

// Mean of ln(S_est / S) for a Welch estimate: psi(nu/2) - ln(nu/2), with nu the
// equivalent degrees of freedom of K overlapped Hann segments.
double welch_log_bias(const WelchMeta& meta) {
  if (meta.averages < 2 || meta.segment_length < 4 || meta.window != "hann") return 0.0;
  const std::size_t len = meta.segment_length;
  const auto step = static_cast<std::size_t>(
      std::max<long long>(1, static_cast<long long>(len) - std::llround(meta.overlap * len)));
  std::vector<double> w(len);
  double norm = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * c::pi * static_cast<double>(k) / len));
    norm += w[k] * w[k];
  }
  const double K = static_cast<double>(meta.averages);
  double denom = 1.0;
  for (std::size_t j = 1; j * step < len && j < meta.averages; ++j) {
    double r = 0.0;
    for (std::size_t k = 0; k + j * step < len; ++k) r += w[k] * w[k + j * step];
    r /= norm;
    denom += 2.0 * (1.0 - static_cast<double>(j) / K) * r * r;
  }
  const double half_nu = K / denom;
  return boost::math::digamma(half_nu) - std::log(half_nu);
}

}  // namespace

Spectrum welch_psd(std::span<const double> x, double dt, const WelchConfig& cfg,
                   SignalUnit unit) {
  if (!(dt > 0.0)) throw InputError("welch_psd: dt must be > 0");
  if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0))
    throw InputError("welch_psd: overlap must lie in [0, 1)");
  const std::size_t n = x.size();
  auto averages_for = [&](std::size_t len) -> std::size_t {
    const std::size_t step =
        std::max<std::size_t>(1, len - static_cast<std::size_t>(std::llround(cfg.overlap * len)));
    return n < len ? 0 : (n - len) / step + 1;
  };
  std::size_t len = cfg.segment_length;
  if (len == 0) {
    len = 16;
    while (averages_for(len * 2) >= 8) len *= 2;
  }
  if (len < 4) throw InputError("welch_psd: segment length must be >= 4");
  const std::size_t avg = averages_for(len);
  if (avg < 4)
    throw InputError("welch_psd: trace of " + std::to_string(n) + " samples gives fewer than " +
                     "4 segments of " + std::to_string(len));
  const std::size_t step = len - static_cast<std::size_t>(std::llround(cfg.overlap * len));

  std::vector<double> win(len);
  double u = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    win[k] = 0.5 * (1.0 - std::cos(2.0 * c::pi * static_cast<double>(k) / len));
    u += win[k] * win[k];
  }
  const std::size_t bins = len / 2 + 1;
  std::vector<double> acc(bins, 0.0);
  RealFft fft(len);
  for (std::size_t s = 0; s < avg; ++s) {
    const double* seg = x.data() + s * step;
    double mean = 0.0;
    if (cfg.remove_mean) mean = std::accumulate(seg, seg + len, 0.0) / static_cast<double>(len);
    double* in = fft.input();
    for (std::size_t k = 0; k < len; ++k) in[k] = (seg[k] - mean) * win[k];
    fft.run();
    const fftw_complex* out = fft.output();
    for (std::size_t k = 0; k < bins; ++k) acc[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
  }
  const double fs = 1.0 / dt;
  const double scale = 1.0 / (fs * u * static_cast<double>(avg));
  Spectrum sp;
  sp.convention = SpectrumConvention::one_sided_hertz;
  sp.unit = unit;
  sp.meta = {len, cfg.overlap, avg, "hann"};
  sp.frequency.resize(bins);
  sp.density.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (len % 2 == 0 && k == bins - 1);
    sp.frequency[k] = static_cast<double>(k) * fs / static_cast<double>(len);
    sp.density[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  return sp;
}

Spectrum welch_psd(const TimeTrace& trace, Axis axis, const WelchConfig& cfg) {
  return welch_psd(trace.position[axis], trace.dt, cfg, trace.unit);
}

double lorentzian(double A, double B, double C, double omega) {
  const double d = B * B - omega * omega;
  return A / (d * d + omega * omega * C * C);
}

double LorentzFit::sigma(std::size_t i) const { return std::sqrt(covariance[i * 3 + i]); }

double LorentzFit::variance() const { return c::pi * A / (B * B * C); }

LorentzFit fit_lorentzian(const Spectrum& spectrum, const FitBand& band) {
  spectrum.validate();
  const Spectrum s = to_two_sided_angular(spectrum);
  const auto& w = s.frequency;
  const auto& d = s.density;
  const bool explicit_band = band.omega_max > band.omega_min && band.omega_max > 0.0;

  // Peak search over positive frequencies inside the requested band.
  std::size_t peak = w.size();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) continue;
    if (explicit_band && (w[i] < band.omega_min || w[i] > band.omega_max)) continue;
    if (peak == w.size() || d[i] > d[peak]) peak = i;
  }
  if (peak == w.size() || !(d[peak] > 0.0))
    throw InputError("fit_lorentzian: no positive spectral values in band");

  const double half = 0.5 * d[peak];
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && w[lo - 1] > 0.0 && d[lo] > half) --lo;
  while (hi + 1 < w.size() && d[hi] > half) ++hi;
  auto cross = [&](std::size_t a, std::size_t b) {
    if (d[a] == d[b]) return w[a];
    return w[a] + (half - d[a]) * (w[b] - w[a]) / (d[b] - d[a]);
  };
  const double spacing = w.size() > 1 ? w[1] - w[0] : 1.0;
  const double left = lo < peak ? cross(lo, lo + 1) : w[peak] - 0.5 * spacing;
  const double right = hi > peak ? cross(hi - 1, hi) : w[peak] + 0.5 * spacing;
  const double b0 = w[peak];
  const double c0 = std::max(right - left, 0.5 * spacing);
  const double a0 = d[peak] * b0 * b0 * c0 * c0;

  const double wmin = explicit_band ? band.omega_min : std::max(0.0, b0 - band.half_widths * c0);
  const double wmax = explicit_band ? band.omega_max : b0 + band.half_widths * c0;
  std::vector<double> om, ls;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0 || w[i] < wmin || w[i] > wmax || !(d[i] > 0.0)) continue;
    om.push_back(w[i]);
    ls.push_back(std::log(d[i]));
  }
  if (om.size() < 6) throw InputError("fit_lorentzian: fewer than 6 points in the fit band");

  LorentzFit fit;
  fit.unit = s.unit;
  fit.points = om.size();
  if (peak == 0 || w[peak] <= wmin || w[peak] >= wmax)
    fit.diagnostic = "peak at band edge; band may not contain a full resonance";

  LogLorentzFunctor f(om, ls);
  Eigen::LevenbergMarquardt<LogLorentzFunctor> lm(f);
  lm.setMaxfev(2000);
  lm.setXtol(1e-14);
  lm.setFtol(1e-14);
  Eigen::VectorXd p(3);
  p << std::log(a0), std::log(b0), std::log(c0);
  const auto status = lm.minimize(p);
  fit.converged = lm_converged(status);
  fit.evaluations = static_cast<int>(lm.nfev());
  if (!fit.converged) {
    if (!fit.diagnostic.empty()) fit.diagnostic += "; ";
    fit.diagnostic += "no convergence (status " + std::to_string(static_cast<int>(status)) +
                      "); best point returned";
  }
  // A log-space fit centres on the mean log of the estimate, which sits below
  // the log of the mean for few averages.
  fit.A = std::exp(p[0] - welch_log_bias(spectrum.meta));
  fit.B = std::exp(p[1]);
  fit.C = std::exp(p[2]);

  Eigen::VectorXd r(om.size());
  f(p, r);
  Eigen::MatrixXd J(om.size(), 3);
  f.df(p, J);
  const double ssr = r.squaredNorm();
  const double dof = static_cast<double>(om.size()) - 3.0;
  fit.residual = std::sqrt(ssr / static_cast<double>(om.size()));
  const Eigen::Matrix3d jtj = J.transpose() * J;
  const Eigen::Matrix3d cov_log = jtj.inverse() * (ssr / dof);
  const std::array<double, 3> lin{fit.A, fit.B, fit.C};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) fit.covariance[i * 3 + j] = lin[i] * lin[j] * cov_log(i, j);
  return fit;
}

double quality_factor(const LorentzFit& fit) {
  if (!(fit.C > 0.0)) throw InputError("quality_factor: C must be > 0");
  return fit.B / fit.C;
}

ReferenceParams extract_reference_params(const LorentzFit& fit, const std::optional<GasSpec>& gas,
                                         double temperature, double density, double nep) {
  if (!(temperature > 0.0)) throw InputError("extract_reference_params: T0 must be > 0");
  if (!(density > 0.0)) throw InputError("extract_reference_params: density must be > 0");
  if (!(nep >= 0.0)) throw InputError("extract_reference_params: NEP must be >= 0");
  ReferenceParams out;
  if (!gas || !(gas->pressure > 0.0)) {
    out.note = "pressure unavailable: radius, mass and conversion factor not determined";
    return out;
  }
  const double r = radius_from_damping(gas->pressure, fit.C, *gas, density);
  const double m = density * 4.0 / 3.0 * c::pi * r * r * r;
  const double g = std::sqrt(fit.A / fit.C * c::pi * m / (c::boltzmann * temperature));
  out.radius = r;
  out.mass = m;
  out.gamma = g;
  out.resolution = nep / g;
  return out;
}

TemperatureEstimate extract_temperature(const LorentzFit& cooled, double reference_damping,
                                        double reference_sigma, double temperature) {
  if (!(cooled.C > 0.0) || !(reference_damping > 0.0))
    throw InputError("extract_temperature: linewidths must be > 0");
  TemperatureEstimate t;
  t.temperature = temperature * reference_damping / cooled.C;
  const double rc = cooled.sigma(2) / cooled.C;
  const double rr = reference_sigma / reference_damping;
  t.sigma = t.temperature * std::sqrt(rc * rc + rr * rr);
  t.heating = cooled.C < reference_damping;
  return t;
}

TemperatureEstimate extract_temperature(const LorentzFit& cooled, const LorentzFit& reference,
                                        double temperature) {
  return extract_temperature(cooled, reference.C, reference.sigma(2), temperature);
}

double equipartition_temperature(std::span<const double> position, double mass, double omega0) {
  if (position.empty()) throw InputError("equipartition_temperature: empty trace");
  double s = 0.0;
  for (double v : position) s += v * v;
  return mass * omega0 * omega0 * (s / static_cast<double>(position.size())) / c::boltzmann;
}

AllanCurve allan_deviation(std::span<const double> x, double dt, std::span<const double> taus) {
  if (!(dt > 0.0)) throw InputError("allan_deviation: dt must be > 0");
  AllanCurve out;
  for (double tau : taus) {
    const auto m = static_cast<std::size_t>(std::llround(tau / dt));
    const std::size_t n = m == 0 ? 0 : x.size() / m;
    if (m == 0 || n < 2) {
      out.rejected.push_back(tau);
      continue;
    }
    double prev = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = std::accumulate(x.begin() + i * m, x.begin() + (i + 1) * m, 0.0) /
                       static_cast<double>(m);
      if (i > 0) sum += (z - prev) * (z - prev);
      prev = z;
    }
    out.tau.push_back(static_cast<double>(m) * dt);
    out.sigma.push_back(std::sqrt(sum / (2.0 * static_cast<double>(n - 1))));
    out.segments.push_back(n);
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InputError("log_grid: bad range");
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  return g;
}

ScanCalibration wavelength_scan_calibration(const WavelengthScan& scan, const ScanInputs& in) {
  const std::size_t n = scan.wavelength.size();
  if (n < 8 || scan.first.size() != n || scan.second.size() != n)
    throw InputError("wavelength_scan_calibration: need >= 8 matching samples");
  if (!(in.omega0 > 0.0)) throw InputError("wavelength_scan_calibration: omega0 must be > 0");
  if (!(in.temperature > 0.0) || !(in.density > 0.0))
    throw InputError("wavelength_scan_calibration: temperature and density must be > 0");

  ScanCalibration out;
  out.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.theta[i] = gouy_reference_phase(in.trap.focal_length, 2.0 * c::pi / scan.wavelength[i]);
  const auto [tmin, tmax] = std::minmax_element(out.theta.begin(), out.theta.end());
  if (*tmax - *tmin < 2.0 * c::pi)
    throw InputError("wavelength_scan_calibration: scan covers less than one period of theta");

  // a^2 = c0 + c1 cos 2theta + c2 sin 2theta; the oscillating part has
  // amplitude scale^2 / 2 and is free of the additive noise power.
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y1(n), y2(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::cos(2.0 * out.theta[i]);
    X(i, 2) = std::sin(2.0 * out.theta[i]);
    y1[i] = scan.first[i] * scan.first[i];
    y2[i] = scan.second[i] * scan.second[i];
  }
  const auto qr = X.colPivHouseholderQr();
  const Eigen::Vector3d c1 = qr.solve(y1), c2 = qr.solve(y2);
  auto amplitude = [](const Eigen::Vector3d& v) { return std::hypot(v[1], v[2]); };
  auto floor = [&](const Eigen::VectorXd& y, const Eigen::Vector3d& v) {
    const double rms = std::sqrt((y - X * v).squaredNorm() / static_cast<double>(n - 3));
    return 5.0 * rms * std::sqrt(2.0 / static_cast<double>(n));
  };
  const double amp1 = amplitude(c1), amp2 = amplitude(c2);
  out.first_scale = std::sqrt(2.0 * amp1);
  out.second_scale = std::sqrt(2.0 * amp2);
  if (!(amp1 > floor(y1, c1)) || !(amp1 > 0.0)) {
    out.note = "first harmonic not resolved above noise";
    return out;
  }
  if (!(amp2 > floor(y2, c2)) || !(amp2 > 0.0)) {
    out.note = "second harmonic not resolved (beta -> 0): z0 unresolvable";
    return out;
  }
  out.ratio = out.second_scale / out.first_scale;
  try {
    out.beta = invert_bessel_ratio(out.ratio);
  } catch (const InputError&) {
    out.note = "harmonic ratio beyond the invertible range";
    return out;
  }
  out.beta_small = 4.0 * out.ratio;

  TrapSpec centre = in.trap;
  centre.wavelength = 0.5 * (scan.wavelength.front() + scan.wavelength.back());
  out.z0 = out.beta / interferometric_wavenumber(centre);
  out.gamma = out.first_scale / out.z0;
  out.mass = c::boltzmann * in.temperature / (in.omega0 * in.omega0 * out.z0 * out.z0);
  out.radius = std::cbrt(3.0 * out.mass / (4.0 * c::pi * in.density));
  out.resolution = in.nep / out.gamma;
  out.resolved = true;
  return out;
}

double recoil_rate(double scattered_power, double mass, double wavelength, double omega0) {
  if (!(mass > 0.0) || !(wavelength > 0.0) || !(omega0 > 0.0))
    throw InputError("recoil_rate: mass, wavelength and omega0 must be > 0");
  const double cl = c::speed_of_light;
  return 0.2 * scattered_power / (mass * cl * cl) * (2.0 * c::pi * cl / (wavelength * omega0));
}

QuantumMetrics quantum_limits(const QuantumInputs& in) {
  in.particle.validate();
  if (!(in.omega0 > 0.0)) throw InputError("quantum_limits: omega0 must be > 0");
  if (!(in.temperature >= 0.0)) throw InputError("quantum_limits: temperature must be >= 0");
  if (in.level < 0) throw InputError("quantum_limits: level must be >= 0");
  if (!(in.extra_damping >= 0.0)) throw InputError("quantum_limits: extra damping must be >= 0");
  const double m = in.particle.mass();
  QuantumMetrics q;
  q.ground_size = std::sqrt(c::hbar / (m * in.omega0));
  const double n = static_cast<double>(in.level);
  q.zero_point = q.ground_size * (std::sqrt(n + 1.0) - std::sqrt(n));
  q.occupancy = c::boltzmann * in.temperature / (c::hbar * in.omega0);
  const double patch = in.patch.value_or(q.ground_size);
  q.scattered_power =
      detected_power_chain(in.particle, in.trap, in.detector, patch, patch).scattered;
  q.recoil_rate = recoil_rate(q.scattered_power, m, in.trap.wavelength, in.omega0);
  q.phonon_limit = in.extra_damping > 0.0 ? q.recoil_rate / in.extra_damping : 0.0;
  return q;
}

PhaseLawFit fit_phase_law(std::span<const double> phase, std::span<const double> temperature,
                          double t0, double damping, double omega0) {
  if (phase.size() != temperature.size() || phase.size() < 3)
    throw InputError("fit_phase_law: need >= 3 matching points");
  if (!(t0 > 0.0) || !(damping > 0.0) || !(omega0 > 0.0))
    throw InputError("fit_phase_law: T0, damping and omega0 must be > 0");
  std::vector<double> lt(temperature.size());
  std::size_t cold = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    if (!(temperature[i] > 0.0)) throw InputError("fit_phase_law: temperatures must be > 0");
    lt[i] = std::log(temperature[i]);
    if (temperature[i] < temperature[cold]) cold = i;
  }
  PhaseLawFunctor f(phase, lt, std::log(t0));
  Eigen::LevenbergMarquardt<PhaseLawFunctor> lm(f);
  lm.setMaxfev(2000);
  Eigen::VectorXd q(2);
  q << std::clamp(t0 / temperature[cold] - 1.0, 0.01, 0.9), phase[cold] - 0.75 * c::pi;
  const auto status = lm.minimize(q);
  PhaseLawFit out;
  out.converged = lm_converged(status);
  double a = q[0], off = q[1];
  if (a < 0.0) {
    a = -a;
    off += 0.5 * c::pi;
  }
  off = std::remainder(off, c::pi);
  out.eta = 2.0 * damping * a / omega0;
  out.phase_offset = off;
  Eigen::VectorXd r(phase.size());
  f(q, r);
  out.residual = std::sqrt(r.squaredNorm() / static_cast<double>(phase.size()));
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("loglog_slope: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InputError("loglog_slope: values must be > 0");
    const double lx = std::log10(x[i]), ly = std::log10(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace levtwin
