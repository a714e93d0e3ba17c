#ifndef LATTICEWALK_OBSERVABLES_HPP_
#define LATTICEWALK_OBSERVABLES_HPP_

#include <cmath>
#include <deque>
#include <string>

#include "latticewalk/types.hpp"

namespace latticewalk {

/// Total energy H = (omega_r/2) p^2 - u cos x - (delta/2) z.
inline double energy(double x, double p, double u, double z, const LatticeParams& params) {
  return 0.5 * params.omega_r * p * p - u * std::cos(x) - 0.5 * params.delta * z;
}
double energy(const AtomState& state, const LatticeParams& params);

/// dH/dtau along the coherent flow: (delta*gamma/4)(u^2+v^2) - (gamma/2) u z cos x.
double coherent_energy_rate(const AtomState& state, const LatticeParams& params);

/// H - (delta*gamma/4) * z2_avg * (tau - tau_jump).
double pseudoenergy(double h, double z2_avg, double tau, double tau_jump,
                    const LatticeParams& params);

/// Exact energy change across a jump with the given recoil, from the
/// pre-jump state: omega_r p q + (omega_r/2) q^2 + delta/2 + u cos x + (delta/2) z.
double jump_energy_change(const AtomState& pre_jump, double recoil, const LatticeParams& params);

struct EnergyReading {
  double tau = 0.0;
  double h = 0.0;
  double h_tilde = 0.0;
  double z2_avg = 0.0;
};

/// Tracks the pseudoenergy along a trajectory.
///
/// <1 - z^2> is a trailing time average over `window` (default 20/gamma),
/// truncated at the last jump, integrated with the trapezoid rule between the
/// observations it is fed. Call reset() at every jump with the post-jump state.
class PseudoenergyTracker {
 public:
  explicit PseudoenergyTracker(const LatticeParams& params, double window = 0.0);

  void reset(const AtomState& post_jump);
  EnergyReading observe(const AtomState& state);

  double window() const { return window_; }
  double last_jump_tau() const { return tau_jump_; }

 private:
  struct Point {
    double tau;
    double integral;  // of (1 - z^2) since the last jump
  };

  double integral_at(double tau) const;

  LatticeParams params_;
  double window_;
  double tau_jump_ = 0.0;
  double last_value_ = 0.0;
  std::deque<Point> history_;
};

enum class SiKind { time, velocity, momentum };

struct SiValue {
  double value = 0.0;
  std::string unit;
};

/// Converts a normalized quantity to SI (momentum is returned in hbar*k_f).
/// Throws ConfigError if a required constant is missing or non-positive.
SiValue to_si(double value, SiKind kind, const LatticeParams& params);

/// Normalized time to microseconds.
double tau_to_microseconds(double tau, const LatticeParams& params);

/// A value from an asymptotic formula together with whether its validity
/// condition holds at the evaluation point.
struct FlaggedValue {
  double value = 0.0;
  bool in_validity_range = true;
};

/// Friction force delta*gamma/(2 omega_r p); valid for |p| >= gamma/(2 omega_r).
FlaggedValue analytic_friction(double p, const LatticeParams& params);

}  // namespace latticewalk

#endif  // LATTICEWALK_OBSERVABLES_HPP_
