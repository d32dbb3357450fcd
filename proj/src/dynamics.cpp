#include "levtwin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "levtwin/constants.hpp"

namespace levtwin {

namespace c = constants;

std::string feedback_mode_name(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::none: return "none";
    case FeedbackMode::ideal_force: return "ideal_force";
    case FeedbackMode::full_loop: return "full_loop";
  }
  return "none";
}

FeedbackMode parse_feedback_mode(std::string_view s) {
  if (s == "none") return FeedbackMode::none;
  if (s == "ideal_force") return FeedbackMode::ideal_force;
  if (s == "full_loop") return FeedbackMode::full_loop;
  throw InputError("unknown feedback mode '" + std::string(s) + "'");
}

std::size_t SimControl::recorded_samples() const {
  return static_cast<std::size_t>(std::llround(duration / (dt * decimation)));
}

Axis3<double> MotionModel::angular_frequencies() const {
  Axis3<double> w{};
  for (std::size_t i = 0; i < 3; ++i) w[i] = std::sqrt(stiffness[i] / mass);
  return w;
}

void MotionModel::validate() const {
  if (!(mass > 0.0)) throw InputError("motion model: mass must be > 0");
  for (std::size_t i = 0; i < 3; ++i)
    if (!(stiffness[i] >= 0.0)) throw InputError("motion model: stiffness must be >= 0");
  if (!(damping >= 0.0)) throw InputError("motion model: damping must be >= 0");
  if (!(temperature >= 0.0)) throw InputError("motion model: temperature must be >= 0");
  if (!(recoil_rate >= 0.0)) throw InputError("motion model: recoil rate must be >= 0");
}

double thermal_step_std(double mass, double damping, double temperature, double dt) {
  if (mass < 0.0 || damping < 0.0 || temperature < 0.0 || dt < 0.0)
    throw InputError("thermal_step_std: inputs must be non-negative");
  return std::sqrt(2.0 * mass * damping * c::boltzmann * temperature * dt);
}

double max_stable_dt(const MotionModel& model) {
  double wmax = 0.0;
  for (double w : model.angular_frequencies().v) wmax = std::max(wmax, w);
  if (wmax == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (50.0 * wmax / (2.0 * c::pi));
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

TimeTrace simulate(const MotionModel& model, const SimControl& control, FeedbackHook* hook) {
  model.validate();
  if (!(control.dt > 0.0)) throw InputError("simulate: dt must be > 0");
  if (!(control.duration > 0.0)) throw InputError("simulate: duration must be > 0");
  if (control.decimation < 1) throw InputError("simulate: decimation must be >= 1");
  if (!(control.warmup >= 0.0)) throw InputError("simulate: warmup must be >= 0");
  const double dt_max = max_stable_dt(model);
  if (control.dt > dt_max) {
    std::ostringstream msg;
    msg << "dt = " << control.dt << " s exceeds the stability bound " << dt_max
        << " s (50 steps per period of the fastest axis)";
    throw StabilityError(msg.str());
  }

  const double dt = control.dt;
  const double m = model.mass;
  const auto omega = model.angular_frequencies();
  Axis3<double> omega_sq{}, kick_std{};
  for (std::size_t i = 0; i < 3; ++i) {
    omega_sq[i] = model.stiffness[i] / m;
    const double thermal = model.thermal_noise
                               ? thermal_step_std(m, model.damping, model.temperature, dt)
                               : 0.0;
    // Recoil: dE/dt = hbar w Gamma_recoil from a white impulse of variance 2 m hbar w G dt.
    const double recoil2 = 2.0 * m * c::hbar * omega[i] * model.recoil_rate * dt;
    kick_std[i] = std::sqrt(thermal * thermal + recoil2) / m;
  }

  auto rng = make_stream(control.seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Axis3<OscillatorState> state{};
  if (model.initial_position) {
    for (std::size_t i = 0; i < 3; ++i) {
      state[i].x = (*model.initial_position)[i];
      state[i].v = model.initial_velocity ? (*model.initial_velocity)[i] : 0.0;
    }
  } else {
    const double kt = c::boltzmann * model.temperature;
    for (std::size_t i = 0; i < 3; ++i) {
      const double sx = model.stiffness[i] > 0.0 ? std::sqrt(kt / model.stiffness[i]) : 0.0;
      state[i].x = sx * gauss(rng);
      state[i].v = std::sqrt(kt / m) * gauss(rng);
    }
  }

  const std::size_t n_rec = control.recorded_samples();
  const auto warm_steps = static_cast<std::size_t>(std::llround(control.warmup / dt));
  const auto dec = static_cast<std::size_t>(control.decimation);
  const std::size_t total = warm_steps + n_rec * dec;

  TimeTrace trace;
  trace.dt = control.sample_interval();
  trace.seed = control.seed;
  trace.unit = SignalUnit::meters;
  for (std::size_t i = 0; i < 3; ++i) {
    trace.position[i].reserve(n_rec);
    if (control.record_velocity) trace.velocity[i].reserve(n_rec);
  }

  if (hook) hook->reset(model, control);

  Axis3<double> xs{}, vs{};
  for (std::size_t n = 0; n < total; ++n) {
    FeedbackAction action;
    if (hook) {
      for (std::size_t i = 0; i < 3; ++i) {
        xs[i] = state[i].x;
        vs[i] = state[i].v;
      }
      action = hook->update(static_cast<double>(n) * dt, xs, vs);
    }
    const double stiff = 1.0 + action.intensity_modulation;
    for (std::size_t i = 0; i < 3; ++i) {
      const double noise = kick_std[i] * gauss(rng);
      symplectic_euler_step(state[i], omega_sq[i] * stiff, model.damping,
                            action.force[i] / m, noise, dt);
    }
    if (!std::isfinite(state[0].x) || !std::isfinite(state[1].x) || !std::isfinite(state[2].x))
      throw IntegrationError("non-finite particle state", n);

    if (n + 1 > warm_steps && (n + 1 - warm_steps) % dec == 0) {
      for (std::size_t i = 0; i < 3; ++i) {
        trace.position[i].push_back(state[i].x);
        if (control.record_velocity) trace.velocity[i].push_back(state[i].v);
      }
    }
  }
  return trace;
}

Spectrum analytic_psd(double mass, double temperature, double damping, double extra_damping,
                      double omega0, double frequency_shift, std::span<const double> omega_grid) {
  const double total = damping + extra_damping;
  if (!(total > 0.0))
    throw InputError("analytic_psd: effective damping must be > 0 (no stationary state)");
  if (!(mass > 0.0)) throw InputError("analytic_psd: mass must be > 0");
  const double pref = c::boltzmann * temperature / (c::pi * mass) * damping;
  const double w1 = omega0 + frequency_shift;
  Spectrum s;
  s.convention = SpectrumConvention::two_sided_angular;
  s.unit = SignalUnit::meters;
  s.frequency.assign(omega_grid.begin(), omega_grid.end());
  s.density.reserve(omega_grid.size());
  for (double w : omega_grid) {
    const double detune = w1 * w1 - w * w;
    s.density.push_back(pref / (detune * detune + w * w * total * total));
  }
  return s;
}

SteadyState steady_state_temperature(double temperature, double damping, double omega0,
                                     double eta, double phase) {
  if (!(damping > 0.0)) throw InputError("steady_state_temperature: damping must be > 0");
  SteadyState out;
  out.denominator = 1.0 - eta * omega0 * std::sin(2.0 * phase) / (2.0 * damping);
  if (!(out.denominator > 0.0)) {
    out.unstable = true;
    out.temperature = std::numeric_limits<double>::infinity();
    return out;
  }
  out.temperature = temperature / out.denominator;
  return out;
}

double cooled_temperature(double temperature, double damping, double omega0, double eta) {
  return temperature * damping / (damping + eta * omega0 / 2.0);
}

}  // namespace levtwin
