#include "levtwin/feedback.hpp"

#include <algorithm>
#include <cmath>

#include "levtwin/constants.hpp"

namespace levtwin {

namespace c = constants;

void FeedbackSpec::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(eta[i] >= 0.0)) throw InputError("feedback: eta must be >= 0");
    if (!std::isfinite(phase[i])) throw InputError("feedback: phase must be finite");
  }
  if (!(pll_bandwidth > 0.0)) throw InputError("feedback: PLL bandwidth must be > 0");
  if (!(lowpass_cutoff > 0.0)) throw InputError("feedback: low-pass cutoff must be > 0");
  if (!(capture_range > 0.0 && capture_range < 1.0))
    throw InputError("feedback: capture range must lie in (0, 1)");
  if (!(lock_threshold > 0.0)) throw InputError("feedback: lock threshold must be > 0");
  if (!(clamp_min >= -1.0)) throw InputError("feedback: clamp_min below -1 allows negative intensity");
  if (!(clamp_max >= clamp_min)) throw InputError("feedback: clamp_max must be >= clamp_min");
  if (!(signal_noise >= 0.0)) throw InputError("feedback: signal noise must be >= 0");
  if (!(window_cycles > 0.0)) throw InputError("feedback: amplitude window must be > 0 cycles");
}

void PllSpec::validate() const {
  if (!(center_frequency > 0.0)) throw InputError("pll: centre frequency must be > 0");
  if (!(loop_bandwidth > 0.0)) throw InputError("pll: loop bandwidth must be > 0");
  if (!(lowpass_cutoff > 0.0)) throw InputError("pll: low-pass cutoff must be > 0");
  if (!(capture_range > 0.0 && capture_range < 1.0))
    throw InputError("pll: capture range must lie in (0, 1)");
  if (!(lock_threshold > 0.0)) throw InputError("pll: lock threshold must be > 0");
}

PllState pll_init(const PllSpec& spec, double phase) {
  spec.validate();
  PllState s;
  s.phase = phase;
  s.frequency = spec.center_frequency;
  // RMS of a uniformly random phase error; the loop starts unlocked.
  s.residual = c::pi / std::sqrt(3.0);
  return s;
}

PllState pll_step(double sample, const PllState& state, const PllSpec& spec, double dt) {
  PllState s = state;
  const double a = 1.0 - std::exp(-2.0 * c::pi * spec.lowpass_cutoff * dt);
  const double mi = sample * std::sin(s.phase);
  const double mq = sample * std::cos(s.phase);
  s.i1 += a * (mi - s.i1);
  s.i2 += a * (s.i1 - s.i2);
  s.q1 += a * (mq - s.q1);
  s.q2 += a * (s.q1 - s.q2);
  s.error = (s.i2 == 0.0 && s.q2 == 0.0) ? 0.0 : std::atan2(s.q2, s.i2);

  const double r = 1.0 - std::exp(-2.0 * c::pi * 0.1 * spec.loop_bandwidth * dt);
  const double mag = std::hypot(s.i2, s.q2);
  s.amplitude = s.amplitude > 0.0 ? s.amplitude + r * (mag - s.amplitude) : mag;
  const double drive =
      s.amplitude > 0.0 ? std::clamp(s.q2 / s.amplitude, -0.5 * c::pi, 0.5 * c::pi) : 0.0;

  const double wn = 2.0 * c::pi * spec.loop_bandwidth;
  const double kp = 2.0 * 0.7071067811865476 * wn;
  const double ki = wn * wn;
  const double lo = spec.center_frequency * (1.0 - spec.capture_range);
  const double hi = spec.center_frequency * (1.0 + spec.capture_range);
  s.frequency += ki * drive * dt;
  // A loop that slips onto the edge of the capture range restarts from the centre.
  if (s.frequency <= lo || s.frequency >= hi) s.frequency = spec.center_frequency;
  const double nco = std::clamp(s.frequency + kp * drive, lo, hi);
  s.phase += nco * dt;

  // Neighbouring lines leak through the demodulation filter as fast ripple on
  // the error; the lock detector looks at (i, q) averaged over the loop bandwidth.
  const double b = 1.0 - std::exp(-2.0 * c::pi * spec.loop_bandwidth * dt);
  s.i3 += b * (s.i2 - s.i3);
  s.q3 += b * (s.q2 - s.q3);
  const double slow = (s.i3 == 0.0 && s.q3 == 0.0) ? 0.0 : std::atan2(s.q3, s.i3);
  const double ms = s.residual * s.residual;
  s.residual = std::sqrt(ms + r * (slow * slow - ms));
  s.locked = s.residual < spec.lock_threshold;
  return s;
}

double feedback_signal(const PllState& state, double eta, double shift) {
  if (eta == 0.0) return 0.0;
  return eta * std::sin(2.0 * state.phase + shift);
}

double modulation_shift(double phase) { return 2.0 * phase + 0.5 * c::pi; }

ControllerOutput controller_step(const Axis3<PllState>& states, const FeedbackSpec& spec,
                                 double extra) {
  double sum = extra;
  for (std::size_t i = 0; i < 3; ++i)
    sum += feedback_signal(states[i], spec.eta[i], modulation_shift(spec.phase[i]));
  ControllerOutput out;
  out.modulation = std::clamp(sum, spec.clamp_min, spec.clamp_max);
  out.saturated = out.modulation != sum;
  return out;
}

double ideal_feedback_force(double x, double v, double eta, double omega0, double amplitude,
                            double stiffness) {
  if (!(amplitude > 0.0)) throw InputError("ideal_feedback_force: amplitude must be > 0");
  if (!(omega0 > 0.0)) throw InputError("ideal_feedback_force: omega0 must be > 0");
  return -2.0 * eta * stiffness * x * x * v / (amplitude * amplitude * omega0);
}

void IdealForceController::reset(const MotionModel& model, const SimControl& control) {
  const double kt = c::boltzmann * model.temperature;
  steps_ = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    stiffness_[i] = model.stiffness[i];
    omega_[i] = std::sqrt(model.stiffness[i] / model.mass);
    std::size_t len = 1;
    if (omega_[i] > 0.0)
      len = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::llround(spec_.window_cycles * 2.0 * c::pi / omega_[i] / control.dt)));
    len_[i] = len;
    // Until a full window has been seen, assume the T0 mean square.
    const double x2 = stiffness_[i] > 0.0 ? kt / stiffness_[i] : 0.0;
    window_[i].assign(len, x2);
    sum_[i] = x2 * static_cast<double>(len);
  }
}

FeedbackAction IdealForceController::update(double, const Axis3<double>& x,
                                            const Axis3<double>& v) {
  FeedbackAction act;
  for (std::size_t i = 0; i < 3; ++i) {
    auto& w = window_[i];
    const std::size_t slot = steps_ % len_[i];
    const double x2 = x[i] * x[i];
    sum_[i] += x2 - w[slot];
    w[slot] = x2;
    if (slot + 1 == len_[i]) {
      double s = 0.0;
      for (double e : w) s += e;
      sum_[i] = s;
    }
    if (spec_.eta[i] == 0.0 || omega_[i] <= 0.0) continue;
    const double a2 = 2.0 * sum_[i] / static_cast<double>(len_[i]);
    if (!(a2 > 0.0)) continue;
    act.force[i] = -std::sin(2.0 * spec_.phase[i]) *
                   ideal_feedback_force(x[i], v[i], spec_.eta[i], omega_[i], std::sqrt(a2), stiffness_[i]);
  }
  ++steps_;
  return act;
}

FullLoopController::FullLoopController(FeedbackSpec spec, TrapSpec trap, DetectorSpec detector,
                                       std::size_t telemetry_stride)
    : spec_(spec), trap_(trap), detector_(detector), telemetry_stride_(telemetry_stride) {
  spec_.validate();
  detector_.validate();
  trap_.validate();
}

void FullLoopController::reset(const MotionModel& model, const SimControl& control) {
  dt_ = control.dt;
  model_.emplace(trap_, detector_, dt_, control.seed);
  rng_ = make_stream(control.seed, 2);
  noise_std_ = spec_.signal_noise * std::sqrt(0.5 / dt_);
  const auto w = model.angular_frequencies();
  for (std::size_t i = 0; i < 3; ++i) {
    pll_spec_[i].center_frequency = w[i];
    pll_spec_[i].loop_bandwidth = spec_.pll_bandwidth;
    pll_spec_[i].lowpass_cutoff = spec_.lowpass_cutoff;
    pll_spec_[i].capture_range = spec_.capture_range;
    pll_spec_[i].lock_threshold = spec_.lock_threshold;
    state_[i] = w[i] > 0.0 ? pll_init(pll_spec_[i]) : PllState{};
  }
  dc_ = model_->noiseless(0.0, 0.0, 0.0);
  dc_alpha_ = 1.0 - std::exp(-2.0 * c::pi * kDcCutoff * dt_);
  saturations_ = 0;
  steps_ = 0;
  recorded_ = 0;
  locked_steps_ = {};
  warm_steps_ = static_cast<std::size_t>(std::llround(control.warmup / control.dt));
  decimation_ = static_cast<std::size_t>(control.decimation);
  telemetry_ = Telemetry{};
  telemetry_.stride = telemetry_stride_;
  telemetry_.dt = control.sample_interval() * static_cast<double>(telemetry_stride_);
}

FeedbackAction FullLoopController::update(double, const Axis3<double>& x, const Axis3<double>&) {
  const double raw = model_->sample(x[0], x[1], x[2]);
  dc_ += dc_alpha_ * (raw - dc_);
  const double sig = raw - dc_;
  for (std::size_t i = 0; i < 3; ++i)
    if (pll_spec_[i].center_frequency > 0.0)
      state_[i] = pll_step(sig, state_[i], pll_spec_[i], dt_);
  const double noise = noise_std_ > 0.0 ? noise_std_ * gauss_(rng_) : 0.0;
  const ControllerOutput out = controller_step(state_, spec_, noise);
  FeedbackAction act;
  act.intensity_modulation = out.modulation;
  if (out.saturated) ++saturations_;

  const std::size_t n = steps_++;
  if (n >= warm_steps_)
    for (std::size_t i = 0; i < 3; ++i)
      if (state_[i].locked) ++locked_steps_[i];
  if (telemetry_stride_ > 0 && n + 1 > warm_steps_ && (n + 1 - warm_steps_) % decimation_ == 0) {
    if (recorded_ % telemetry_stride_ == 0) {
      for (std::size_t i = 0; i < 3; ++i) {
        telemetry_.phase[i].push_back(state_[i].phase);
        telemetry_.frequency[i].push_back(state_[i].frequency);
        telemetry_.residual[i].push_back(state_[i].residual);
      }
      telemetry_.output.push_back(act.intensity_modulation);
    }
    ++recorded_;
  }
  return act;
}

Axis3<double> FullLoopController::locked_fraction() const {
  Axis3<double> out{};
  if (steps_ <= warm_steps_) return out;
  const double n = static_cast<double>(steps_ - warm_steps_);
  for (std::size_t i = 0; i < 3; ++i) out[i] = static_cast<double>(locked_steps_[i]) / n;
  return out;
}

}  // namespace levtwin
