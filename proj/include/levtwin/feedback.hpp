#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "levtwin/detector.hpp"
#include "levtwin/dynamics.hpp"

namespace levtwin {

/// Per-axis parametric feedback settings. `phase` follows the temperature-law
/// convention: T = T0 / (1 - eta w0 sin(2 phase) / (2 G0)), cooling at 3 pi / 4.
struct FeedbackSpec {
  Axis3<double> eta{};                   // peak intensity modulation, fraction of I0
  Axis3<double> phase = Axis3<double>::uniform(2.356194490192345);
  double pll_bandwidth = 300.0;          // Hz
  double lowpass_cutoff = 1500.0;        // Hz
  double capture_range = 0.1;            // fraction of the centre frequency
  double lock_threshold = 0.8;           // rad, RMS phase error
  double clamp_min = -0.5;               // I_min / I0 - 1
  double clamp_max = 0.5;                // I_max / I0 - 1
  double signal_noise = 0.0;             // 1/sqrt(Hz), white noise on the summed output
  double window_cycles = 10.0;           // amplitude window for the ideal force

  void validate() const;
};

struct PllSpec {
  double center_frequency = 0.0;  // rad/s
  double loop_bandwidth = 300.0;  // Hz
  double lowpass_cutoff = 1500.0; // Hz
  double capture_range = 0.1;
  double lock_threshold = 0.8;    // rad

  void validate() const;
};

struct PllState {
  double phase = 0.0;       // unwrapped, rad; signal ~ sin(phase)
  double frequency = 0.0;   // integrator estimate, rad/s
  double error = 0.0;       // last phase error, rad
  double residual = 0.0;    // running RMS of the slow phase error, rad
  bool locked = false;
  double i1 = 0.0, i2 = 0.0, q1 = 0.0, q2 = 0.0;  // demodulation filters
  double amplitude = 0.0;   // slow mean of |(i, q)|, normalises the loop error
  double i3 = 0.0, q3 = 0.0;  // (i, q) filtered at the loop bandwidth, lock detector only
};

PllState pll_init(const PllSpec& spec, double phase = 0.0);

/// Advances the loop by one input sample. The loop is driven by the quadrature
/// component over its slow mean amplitude, so fades of the tracked line hand
/// control to the integrator instead of to whatever else is in the band.
PllState pll_step(double sample, const PllState& state, const PllSpec& spec, double dt);

/// Raw lock-in output eta sin(2 phase_hat + shift).
double feedback_signal(const PllState& state, double eta, double shift);

/// Lock-in shift that realises a temperature-law phase.
double modulation_shift(double phase);

struct ControllerOutput {
  double modulation = 0.0;
  bool saturated = false;
};

/// Sums the three axis signals and clamps the result.
ControllerOutput controller_step(const Axis3<PllState>& states, const FeedbackSpec& spec,
                                 double extra = 0.0);

/// Slow-amplitude parametric force -(2 eta k0 / (A^2 w0)) x^2 v.
double ideal_feedback_force(double x, double v, double eta, double omega0, double amplitude,
                            double stiffness);

struct Telemetry {
  std::size_t stride = 1;  // one row per `stride` trace samples
  double dt = 0.0;         // row spacing, s
  Axis3<std::vector<double>> phase, frequency, residual;
  std::vector<double> output;

  std::size_t size() const { return output.size(); }
};

/// Per-axis analytic force with a sliding mean-square amplitude estimate. The
/// phase scales it by -sin(2 phase), full strength at 3 pi / 4; the cos(2 phase)
/// frequency pull is left out.
class IdealForceController final : public FeedbackHook {
 public:
  explicit IdealForceController(FeedbackSpec spec) : spec_(spec) { spec_.validate(); }
  void reset(const MotionModel& model, const SimControl& control) override;
  FeedbackAction update(double t, const Axis3<double>& x, const Axis3<double>& v) override;

 private:
  FeedbackSpec spec_;
  Axis3<double> stiffness_{}, omega_{};
  Axis3<std::vector<double>> window_;
  Axis3<double> sum_{};
  Axis3<std::size_t> len_{};
  std::size_t steps_ = 0;
};

/// PLL tracking of the single detector signal, doubled and summed into one
/// intensity modulation.
class FullLoopController final : public FeedbackHook {
 public:
  FullLoopController(FeedbackSpec spec, TrapSpec trap, DetectorSpec detector,
                     std::size_t telemetry_stride = 0);
  void reset(const MotionModel& model, const SimControl& control) override;
  FeedbackAction update(double t, const Axis3<double>& x, const Axis3<double>& v) override;

  std::size_t saturation_count() const { return saturations_; }
  std::size_t steps() const { return steps_; }
  const Axis3<PllState>& pll() const { return state_; }
  /// Share of post-warmup steps each PLL spent locked.
  Axis3<double> locked_fraction() const;
  const Telemetry& telemetry() const { return telemetry_; }

 private:
  FeedbackSpec spec_;
  TrapSpec trap_;
  DetectorSpec detector_;
  std::optional<DetectorModel> model_;
  Axis3<PllSpec> pll_spec_{};
  Axis3<PllState> state_{};
  double dt_ = 0.0;
  // The diode DC is tracked by a slow one-pole filter and removed before the PLLs.
  static constexpr double kDcCutoff = 20.0;  // Hz
  double dc_ = 0.0;
  double dc_alpha_ = 0.0;
  double noise_std_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::size_t saturations_ = 0;
  std::size_t steps_ = 0;
  std::size_t warm_steps_ = 0;
  std::size_t decimation_ = 1;
  std::size_t telemetry_stride_ = 0;
  std::size_t recorded_ = 0;
  Axis3<std::size_t> locked_steps_{};
  Telemetry telemetry_;
};

}  // namespace levtwin
