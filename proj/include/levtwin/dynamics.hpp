#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "levtwin/common.hpp"
#include "levtwin/spectrum.hpp"

namespace levtwin {

enum class FeedbackMode { none, ideal_force, full_loop };

std::string feedback_mode_name(FeedbackMode m);
FeedbackMode parse_feedback_mode(std::string_view s);

struct SimControl {
  double dt = 1e-7;        // integration step, s
  double duration = 1.0;   // recorded span, s
  double warmup = 0.0;     // integrated but not recorded, s
  int decimation = 1;      // record every n-th step
  std::uint64_t seed = 1;
  bool record_velocity = false;
  FeedbackMode feedback_mode = FeedbackMode::none;

  std::size_t recorded_samples() const;
  double sample_interval() const { return dt * decimation; }
};

/// Linear, axis-decoupled oscillator parameters for one run.
struct MotionModel {
  double mass = 0.0;
  Axis3<double> stiffness{};
  double damping = 0.0;       // Gamma_0, s^-1
  double temperature = 0.0;   // T_0, K
  bool thermal_noise = true;
  double recoil_rate = 0.0;   // optional photon-recoil heating, phonons/s per axis
  // Explicit start state; when unset the state is drawn from the T_0 ensemble.
  std::optional<Axis3<double>> initial_position;
  std::optional<Axis3<double>> initial_velocity;

  Axis3<double> angular_frequencies() const;
  void validate() const;
};

struct TimeTrace {
  double dt = 0.0;
  SignalUnit unit = SignalUnit::meters;
  std::uint64_t seed = 0;
  std::string config_digest;
  Axis3<std::vector<double>> position;
  Axis3<std::vector<double>> velocity;  // empty unless recorded

  std::size_t size() const {
    for (const auto& p : position.v)
      if (!p.empty()) return p.size();
    return 0;
  }
  bool has_velocity() const { return !velocity.x().empty(); }
  double duration() const { return dt * static_cast<double>(size()); }
  std::span<const double> axis(Axis a) const { return position[a]; }
};

/// What a feedback hook asks of the next integration step.
struct FeedbackAction {
  double intensity_modulation = 0.0;  // u: k_i -> k_i (1 + u) on all axes
  Axis3<double> force{};               // direct force, N
};

/// Called once per integration step with the pre-step state.
class FeedbackHook {
 public:
  virtual ~FeedbackHook() = default;
  virtual void reset(const MotionModel& model, const SimControl& control) = 0;
  virtual FeedbackAction update(double t, const Axis3<double>& x, const Axis3<double>& v) = 0;
};

/// Impulse standard deviation (N s) of the thermal force over one step.
double thermal_step_std(double mass, double damping, double temperature, double dt);

struct OscillatorState {
  double x = 0.0;
  double v = 0.0;
};

/// One semi-implicit Euler step: velocity first (with the impulse dv_noise),
/// then position with the updated velocity.
inline void symplectic_euler_step(OscillatorState& s, double omega_sq, double damping,
                                  double accel, double dv_noise, double dt) {
  s.v += (-omega_sq * s.x - damping * s.v + accel) * dt + dv_noise;
  s.x += s.v * dt;
}

/// Largest dt accepted for the given trap (50 steps per fastest period).
double max_stable_dt(const MotionModel& model);

/// Integrates the three decoupled Langevin equations. Throws StabilityError
/// when dt is too coarse and IntegrationError when the state diverges.
TimeTrace simulate(const MotionModel& model, const SimControl& control,
                   FeedbackHook* hook = nullptr);

/// Seeded generator for an independent named stream derived from a run seed.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_id);

/// Modified Lorentzian of the feedback-damped oscillator, two-sided in
/// angular frequency: (kT/(pi m)) G0 / ((w1^2 - w^2)^2 + w^2 (G0 + dG)^2).
Spectrum analytic_psd(double mass, double temperature, double damping, double extra_damping,
                      double omega0, double frequency_shift, std::span<const double> omega_grid);

/// Outcome of the phase-dependent temperature law; `unstable` replaces the
/// temperature when the effective damping is not positive.
struct SteadyState {
  double temperature = 0.0;
  double denominator = 0.0;
  bool unstable = false;
};

/// T_cm = T_0 / (1 - eta w0 sin(2 phi) / (2 Gamma_0)).
SteadyState steady_state_temperature(double temperature, double damping, double omega0,
                                     double eta, double phase);

/// Optimal-phase form T_0 Gamma_0 / (Gamma_0 + eta w0 / 2).
double cooled_temperature(double temperature, double damping, double omega0, double eta);

}  // namespace levtwin
