#ifndef LATTICEWALK_DYNAMICS_HPP_
#define LATTICEWALK_DYNAMICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latticewalk/observables.hpp"
#include "latticewalk/rng.hpp"
#include "latticewalk/types.hpp"

namespace latticewalk {

/// Coherent right-hand side of the Hamilton-Schroedinger equations (jump terms excluded).
/// Expects a unit Bloch vector; the result is tangent to the Bloch sphere for any input.
StateDerivative coherent_derivs(const AtomState& state, const LatticeParams& params);

/// One classical fourth-order Runge-Kutta step of the coherent flow.
AtomState rk4_step(const AtomState& state, double dtau, const LatticeParams& params);

/// Recoil momentum of one spontaneous emission, uniform on [-1, 1].
double sample_recoil(RandomStream& rng);

/// Quantum jump to the ground state with a momentum kick.
/// Throws std::invalid_argument if |recoil| > 1.
AtomState apply_jump(const AtomState& state, double recoil);

/// Advance of a flow over one step, with the integrated jump hazard.
struct StepResult {
  AtomState next;
  double hazard = 0.0;
};

/// Coherent flow with jump rate gamma (z + 1) / 2.
///
/// The hazard is integrated alongside the state with the RK4 weights, i.e.
/// Simpson's rule on the stage values of z. sin/cos of the stage positions are
/// obtained from sin/cos at the step start by an angle-addition series, since
/// the position moves by omega_r * p * h per step.
class CoherentFlow {
 public:
  explicit CoherentFlow(const LatticeParams& params) : params_(params) {}

  const LatticeParams& params() const { return params_; }

  StepResult step(const AtomState& s, double h) const {
    const double wr = params_.omega_r;
    const double delta = params_.delta;
    const double half_gamma = 0.5 * params_.gamma;

    double s0 = 0.0;
    double c0 = 0.0;
    sincos(s.x, s0, c0);

    // Stage 1
    const double sx1 = s0, cx1 = c0;
    const double k1x = wr * s.p;
    const double k1p = -s.u * sx1;
    const double k1u = delta * s.v + half_gamma * s.u * s.z;
    const double k1v = -delta * s.u + 2.0 * s.z * cx1 + half_gamma * s.v * s.z;
    const double k1z = -2.0 * s.v * cx1 - half_gamma * (s.u * s.u + s.v * s.v);

    // Stage 2
    const double hh = 0.5 * h;
    const double p2 = s.p + hh * k1p, u2 = s.u + hh * k1u, v2 = s.v + hh * k1v,
                 z2 = s.z + hh * k1z;
    double sx2, cx2;
    shifted(s0, c0, hh * k1x, sx2, cx2);
    const double k2x = wr * p2;
    const double k2p = -u2 * sx2;
    const double k2u = delta * v2 + half_gamma * u2 * z2;
    const double k2v = -delta * u2 + 2.0 * z2 * cx2 + half_gamma * v2 * z2;
    const double k2z = -2.0 * v2 * cx2 - half_gamma * (u2 * u2 + v2 * v2);

    // Stage 3
    const double p3 = s.p + hh * k2p, u3 = s.u + hh * k2u, v3 = s.v + hh * k2v,
                 z3 = s.z + hh * k2z;
    double sx3, cx3;
    shifted(s0, c0, hh * k2x, sx3, cx3);
    const double k3x = wr * p3;
    const double k3p = -u3 * sx3;
    const double k3u = delta * v3 + half_gamma * u3 * z3;
    const double k3v = -delta * u3 + 2.0 * z3 * cx3 + half_gamma * v3 * z3;
    const double k3z = -2.0 * v3 * cx3 - half_gamma * (u3 * u3 + v3 * v3);

    // Stage 4
    const double p4 = s.p + h * k3p, u4 = s.u + h * k3u, v4 = s.v + h * k3v,
                 z4 = s.z + h * k3z;
    double sx4, cx4;
    shifted(s0, c0, h * k3x, sx4, cx4);
    const double k4x = wr * p4;
    const double k4p = -u4 * sx4;
    const double k4u = delta * v4 + half_gamma * u4 * z4;
    const double k4v = -delta * u4 + 2.0 * z4 * cx4 + half_gamma * v4 * z4;
    const double k4z = -2.0 * v4 * cx4 - half_gamma * (u4 * u4 + v4 * v4);

    const double w = h * (1.0 / 6.0);
    StepResult r;
    r.next.x = s.x + w * (k1x + 2.0 * (k2x + k3x) + k4x);
    r.next.p = s.p + w * (k1p + 2.0 * (k2p + k3p) + k4p);
    r.next.u = s.u + w * (k1u + 2.0 * (k2u + k3u) + k4u);
    r.next.v = s.v + w * (k1v + 2.0 * (k2v + k3v) + k4v);
    r.next.z = s.z + w * (k1z + 2.0 * (k2z + k3z) + k4z);
    r.next.tau = s.tau + h;
    r.hazard = w * half_gamma * ((s.z + 1.0) + 2.0 * (z2 + 1.0) + 2.0 * (z3 + 1.0) + (z4 + 1.0));
    return r;
  }

  double hazard_rate(const AtomState& s) const { return 0.5 * params_.gamma * (s.z + 1.0); }
  AtomState jump(const AtomState& s, double recoil) const { return apply_jump(s, recoil); }
  double energy(const AtomState& s) const { return latticewalk::energy(s, params_); }

 private:
  static void sincos(double x, double& s, double& c) {
    s = std::sin(x);
    c = std::cos(x);
  }

  // sin(x + d), cos(x + d) from sin x, cos x.
  static void shifted(double s0, double c0, double d, double& s, double& c) {
    double sd, cd;
    if (std::abs(d) < 1e-2) {
      const double d2 = d * d;
      // Taylor series; truncation error below 1e-18 for |d| < 1e-2.
      sd = d * (1.0 - d2 * (1.0 / 6.0) * (1.0 - d2 * (1.0 / 20.0) * (1.0 - d2 * (1.0 / 42.0))));
      cd = 1.0 - d2 * 0.5 *
                     (1.0 - d2 * (1.0 / 12.0) *
                                (1.0 - d2 * (1.0 / 30.0) * (1.0 - d2 * (1.0 / 56.0))));
    } else {
      sd = std::sin(d);
      cd = std::cos(d);
    }
    s = s0 * cd + c0 * sd;
    c = c0 * cd - s0 * sd;
  }

  LatticeParams params_;
};

struct IntegratorOptions {
  double dtau = 1e-2;
  double jump_time_tol = 1e-6;
  // Emit a state sample every this many grid steps (0 disables sampling).
  std::uint64_t sample_every = 0;

  /// Throws ConfigError unless 0 < dtau <= 0.05 and jump_time_tol > 0.
  void validate() const;
};

/// Receives the events of one trajectory as they happen.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_jump(const SpontaneousEvent&) {}
  /// Momentum changed sign at `tau`; `state` is the state at the end of the step
  /// (or just after the kick, when a kick flipped the sign).
  virtual void on_sign_change(double /*tau*/, const AtomState& /*state*/) {}
  virtual void on_sample(const AtomState& /*state*/, double /*energy*/) {}
};

enum class TrajectoryStatus { finished, aborted };

struct EvolveResult {
  AtomState state;  // final state, or the last finite state when aborted
  TrajectoryStatus status = TrajectoryStatus::finished;
  double last_good_tau = 0.0;
  std::uint64_t n_jumps = 0;
  std::uint64_t n_sign_changes = 0;
  std::string diagnostic;
};

namespace detail {
inline int sign_of(double p) { return (p > 0.0) - (p < 0.0); }
}  // namespace detail

/// Event bookkeeping of one trajectory on the grid tau0 + n*dtau.
///
/// Jump times follow the waiting-time construction: the integrated hazard is
/// accumulated step by step and a jump fires when it reaches -ln r, r drawn
/// uniformly on (0, 1). The firing time inside a step is located by bisection
/// on the sub-step length. The grid is kept across jumps, so after a jump the
/// rest of the grid interval is integrated as a shorter step.
///
/// The caller supplies full grid steps, which lets several trajectories share
/// one vectorised integrator; sub-steps go through flow.step.
/// Flow must provide step(state, h) -> StepResult, jump(state, recoil) and
/// energy(state).
template <class Flow>
class TrajectoryDriver {
 public:
  TrajectoryDriver(const Flow& flow, const AtomState& start, double tau_end,
                   const IntegratorOptions& options, RandomStream& rng, EventSink& sink)
      : flow_(&flow), options_(options), rng_(&rng), sink_(&sink), state_(start),
        tau0_(start.tau), tau_end_(tau_end) {
    threshold_ = -std::log(rng_->uniform_open());
    last_jump_tau_ = tau0_;
    last_sign_ = detail::sign_of(state_.p);
    if (options_.sample_every > 0) sink_->on_sample(state_, flow_->energy(state_));
    grid_end_ = next_grid_point();
    done_ = !(state_.tau < tau_end_);
  }

  bool done() const { return done_; }
  const AtomState& state() const { return state_; }
  /// Length of the next full step, from state().tau to the next grid point.
  double step_length() const { return grid_end_ - state_.tau; }

  /// Consumes `step`, the flow advanced from state() by step_length().
  /// Returns true when the step was taken unchanged; false when a jump forced
  /// sub-steps or the trajectory stopped.
  bool advance(StepResult step) {
    bool unchanged = true;
    for (;;) {
      if (!step.next.finite() || !std::isfinite(step.hazard)) {
        abort("non-finite state after step at tau=" + std::to_string(state_.tau));
        return false;
      }
      if (hazard_ + step.hazard < threshold_) break;
      unchanged = false;
      fire(step);
      if (!(grid_end_ - state_.tau > 0.0)) {
        finish_grid_point(state_);
        return false;
      }
      step = flow_->step(state_, grid_end_ - state_.tau);
    }
    hazard_ += step.hazard;
    finish_grid_point(step.next);
    return unchanged && !done_;
  }

  void advance() { advance(flow_->step(state_, step_length())); }

  /// Re-enters after grid steps taken elsewhere. The caller guarantees that
  /// those steps crossed no jump threshold, no sign change and no sample point;
  /// `state` sits on grid point `steps` and `hazard` is the accumulated hazard.
  void resume(const AtomState& state, double hazard, std::uint64_t steps) {
    state_ = state;
    hazard_ = hazard;
    n_ = steps;
    grid_end_ = next_grid_point();
    done_ = !(state_.tau < tau_end_);
  }

  double hazard() const { return hazard_; }
  double threshold() const { return threshold_; }

  EvolveResult result() const {
    EvolveResult r = result_;
    r.state = state_;
    r.last_good_tau = state_.tau;
    return r;
  }

 private:
  double next_grid_point() const {
    return std::min(tau0_ + static_cast<double>(n_ + 1) * options_.dtau, tau_end_);
  }

  void note_sign(double tau_cross, const AtomState& after) {
    const int sgn = detail::sign_of(after.p);
    if (sgn == 0) return;
    if (last_sign_ != 0 && sgn != last_sign_) {
      sink_->on_sign_change(tau_cross, after);
      ++result_.n_sign_changes;
    }
    last_sign_ = sgn;
  }

  static double crossing_time(const AtomState& a, const AtomState& b) {
    if (a.p == b.p) return a.tau;
    return a.tau + (b.tau - a.tau) * (a.p / (a.p - b.p));
  }

  // Locates the jump inside `step` and applies it.
  void fire(const StepResult& step) {
    double lo = 0.0;
    double hi = step.next.tau - state_.tau;
    StepResult at_hi = step;
    while (hi - lo > options_.jump_time_tol) {
      const double mid = 0.5 * (lo + hi);
      StepResult trial = flow_->step(state_, mid);
      if (hazard_ + trial.hazard >= threshold_) {
        hi = mid;
        at_hi = trial;
      } else {
        lo = mid;
      }
    }
    const AtomState pre = at_hi.next;
    note_sign(crossing_time(state_, pre), pre);

    SpontaneousEvent ev;
    ev.tau = pre.tau;
    ev.pre_state = pre;
    ev.recoil = sample_recoil(*rng_);
    ev.interval = pre.tau - last_jump_tau_;
    const AtomState post = flow_->jump(pre, ev.recoil);
    ev.post_energy = flow_->energy(post);
    sink_->on_jump(ev);
    ++result_.n_jumps;
    note_sign(pre.tau, post);

    last_jump_tau_ = pre.tau;
    hazard_ = 0.0;
    threshold_ = -std::log(rng_->uniform_open());
    state_ = post;
  }

  void finish_grid_point(const AtomState& next) {
    const AtomState prev = state_;
    state_ = next;
    state_.tau = grid_end_;
    note_sign(crossing_time(prev, state_), state_);
    ++n_;
    if (options_.sample_every > 0 && n_ % options_.sample_every == 0) {
      sink_->on_sample(state_, flow_->energy(state_));
    }
    grid_end_ = next_grid_point();
    done_ = !(state_.tau < tau_end_);
  }

  void abort(std::string why) {
    result_.status = TrajectoryStatus::aborted;
    result_.diagnostic = std::move(why);
    done_ = true;
  }

  const Flow* flow_;
  IntegratorOptions options_;
  RandomStream* rng_;
  EventSink* sink_;
  AtomState state_;
  double tau0_;
  double tau_end_;
  double grid_end_ = 0.0;
  std::uint64_t n_ = 0;
  double hazard_ = 0.0;
  double threshold_ = 0.0;
  double last_jump_tau_ = 0.0;
  int last_sign_ = 0;
  bool done_ = false;
  EvolveResult result_;
};

/// Evolves `state` to `tau_end` under `flow`, interleaving quantum jumps.
template <class Flow>
EvolveResult evolve_with(const Flow& flow, const AtomState& state, double tau_end,
                         const IntegratorOptions& options, RandomStream& rng, EventSink& sink) {
  TrajectoryDriver<Flow> driver(flow, state, tau_end, options, rng, sink);
  while (!driver.done()) driver.advance();
  return driver.result();
}

/// Number of trajectories integrated in lockstep by evolve_batch.
inline constexpr std::size_t kBatchWidth = 8;

/// One trajectory of a batch.
struct BatchMember {
  AtomState state;
  RandomStream* rng = nullptr;
  EventSink* sink = nullptr;
};

/// Evolves up to kBatchWidth trajectories of the coherent flow with jumps.
///
/// All members must start at the same tau so that they share the step grid.
/// Grid steps are integrated for all members at once; a member's result does
/// not depend on the other members of its batch. Throws std::invalid_argument
/// for an empty or oversized batch or misaligned start times.
std::vector<EvolveResult> evolve_batch(std::span<const BatchMember> members, double tau_end,
                                       const LatticeParams& params,
                                       const IntegratorOptions& options);

/// Evolves under the coherent flow of `params` with spontaneous emission.
/// Same arithmetic as a one-member evolve_batch.
EvolveResult evolve(const AtomState& state, double tau_end, const LatticeParams& params,
                    const IntegratorOptions& options, RandomStream& rng, EventSink& sink);

}  // namespace latticewalk

#endif  // LATTICEWALK_DYNAMICS_HPP_
