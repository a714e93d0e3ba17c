#include "latticewalk/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace latticewalk {

StateDerivative coherent_derivs(const AtomState& s, const LatticeParams& params) {
  const double half_gamma = 0.5 * params.gamma;
  const double cx = std::cos(s.x);
  StateDerivative d;
  d.dx = params.omega_r * s.p;
  d.dp = -s.u * std::sin(s.x);
  d.du = params.delta * s.v + half_gamma * s.u * s.z;
  d.dv = -params.delta * s.u + 2.0 * s.z * cx + half_gamma * s.v * s.z;
  d.dz = -2.0 * s.v * cx - half_gamma * (s.u * s.u + s.v * s.v);
  return d;
}

AtomState rk4_step(const AtomState& state, double dtau, const LatticeParams& params) {
  return CoherentFlow(params).step(state, dtau).next;
}

double sample_recoil(RandomStream& rng) { return 2.0 * rng.uniform() - 1.0; }

AtomState apply_jump(const AtomState& state, double recoil) {
  if (!(std::abs(recoil) <= 1.0)) {
    throw std::invalid_argument("recoil momentum must lie in [-1, 1], got " +
                                std::to_string(recoil));
  }
  AtomState out = state;
  out.p += recoil;
  out.u = 0.0;
  out.v = 0.0;
  out.z = -1.0;
  return out;
}

void IntegratorOptions::validate() const {
  if (!(dtau > 0.0) || dtau > 0.05) {
    throw ConfigError("integrator.dtau must lie in (0, 0.05], got " + std::to_string(dtau));
  }
  if (!(jump_time_tol > 0.0)) throw ConfigError("integrator.jump_time_tol must be > 0");
}

namespace {

// Structure-of-arrays state of a batch; sin/cos of x are carried between steps.
struct Lanes {
  alignas(64) double x[kBatchWidth];
  alignas(64) double p[kBatchWidth];
  alignas(64) double u[kBatchWidth];
  alignas(64) double v[kBatchWidth];
  alignas(64) double z[kBatchWidth];
  alignas(64) double sx[kBatchWidth];
  alignas(64) double cx[kBatchWidth];
  alignas(64) double hazard[kBatchWidth];
};

// Exact sin/cos are recomputed this often to stop round-off build-up in the carry.
constexpr unsigned kResyncSteps = 64;

// Position shifts beyond this bound leave the range of the series below.
constexpr double kMaxShift = 1e-2;

// sin(x + d), cos(x + d) for |d| < kMaxShift.
inline void shift_angle(double s0, double c0, double d, double& s, double& c) {
  const double d2 = d * d;
  const double sd =
      d * (1.0 - d2 * (1.0 / 6.0) * (1.0 - d2 * (1.0 / 20.0) * (1.0 - d2 * (1.0 / 42.0))));
  const double cd =
      1.0 - d2 * 0.5 *
                (1.0 - d2 * (1.0 / 12.0) * (1.0 - d2 * (1.0 / 30.0) * (1.0 - d2 * (1.0 / 56.0))));
  s = s0 * cd + c0 * sd;
  c = c0 * cd - s0 * sd;
}

// RK4 step of every lane, in place, with the same stages as CoherentFlow::step.
// A lane is quiet when the step fires no jump, keeps the sign of p, stays
// finite and moves x little enough for the angle series; quiet lanes add the
// step hazard to acc, the others get loud = 1 and keep acc unchanged. The
// starting state is left in prev. `all_loud` makes every lane loud, for steps
// whose end the drivers must see.
void step_lanes(Lanes& L, Lanes& prev, double h, const LatticeParams& params, double max_p_h,
                bool all_loud, double* acc, const double* thr, double* loud) {
  const double wr = params.omega_r;
  const double delta = params.delta;
  const double g2 = 0.5 * params.gamma;
  const double hh = 0.5 * h;
  const double w = h * (1.0 / 6.0);
#pragma GCC ivdep
  for (std::size_t l = 0; l < kBatchWidth; ++l) {
    const double x = L.x[l], p = L.p[l], u = L.u[l], v = L.v[l], z = L.z[l];
    const double s0 = L.sx[l], c0 = L.cx[l];
    prev.x[l] = x;
    prev.p[l] = p;
    prev.u[l] = u;
    prev.v[l] = v;
    prev.z[l] = z;

    const double k1x = wr * p;
    const double k1p = -u * s0;
    const double k1u = delta * v + g2 * u * z;
    const double k1v = -delta * u + 2.0 * z * c0 + g2 * v * z;
    const double k1z = -2.0 * v * c0 - g2 * (u * u + v * v);

    const double p2 = p + hh * k1p, u2 = u + hh * k1u, v2 = v + hh * k1v, z2 = z + hh * k1z;
    double s2, c2;
    shift_angle(s0, c0, hh * k1x, s2, c2);
    const double k2x = wr * p2;
    const double k2p = -u2 * s2;
    const double k2u = delta * v2 + g2 * u2 * z2;
    const double k2v = -delta * u2 + 2.0 * z2 * c2 + g2 * v2 * z2;
    const double k2z = -2.0 * v2 * c2 - g2 * (u2 * u2 + v2 * v2);

    const double p3 = p + hh * k2p, u3 = u + hh * k2u, v3 = v + hh * k2v, z3 = z + hh * k2z;
    double s3, c3;
    shift_angle(s0, c0, hh * k2x, s3, c3);
    const double k3x = wr * p3;
    const double k3p = -u3 * s3;
    const double k3u = delta * v3 + g2 * u3 * z3;
    const double k3v = -delta * u3 + 2.0 * z3 * c3 + g2 * v3 * z3;
    const double k3z = -2.0 * v3 * c3 - g2 * (u3 * u3 + v3 * v3);

    const double p4 = p + h * k3p, u4 = u + h * k3u, v4 = v + h * k3v, z4 = z + h * k3z;
    double s4, c4;
    shift_angle(s0, c0, h * k3x, s4, c4);
    const double k4x = wr * p4;
    const double k4p = -u4 * s4;
    const double k4u = delta * v4 + g2 * u4 * z4;
    const double k4v = -delta * u4 + 2.0 * z4 * c4 + g2 * v4 * z4;
    const double k4z = -2.0 * v4 * c4 - g2 * (u4 * u4 + v4 * v4);

    const double dx = w * (k1x + 2.0 * (k2x + k3x) + k4x);
    L.x[l] = x + dx;
    L.p[l] = p + w * (k1p + 2.0 * (k2p + k3p) + k4p);
    L.u[l] = u + w * (k1u + 2.0 * (k2u + k3u) + k4u);
    L.v[l] = v + w * (k1v + 2.0 * (k2v + k3v) + k4v);
    L.z[l] = z + w * (k1z + 2.0 * (k2z + k3z) + k4z);
    L.hazard[l] = w * g2 * ((z + 1.0) + 2.0 * (z2 + 1.0) + 2.0 * (z3 + 1.0) + (z4 + 1.0));
    double sn, cn;
    shift_angle(s0, c0, dx, sn, cn);
    L.sx[l] = sn;
    L.cx[l] = cn;

    const double next_acc = acc[l] + L.hazard[l];
    const double sum = L.x[l] + L.p[l] + L.u[l] + L.v[l] + L.z[l] + L.hazard[l];
    const bool quiet = (next_acc < thr[l]) & (p * L.p[l] > 0.0) & (sum - sum == 0.0) &
                       (std::abs(p) * h < max_p_h) & !all_loud;
    acc[l] = quiet ? next_acc : acc[l];
    loud[l] = quiet ? 0.0 : 1.0;
  }
}

void load_lane(Lanes& L, std::size_t l, const AtomState& s) {
  L.x[l] = s.x;
  L.p[l] = s.p;
  L.u[l] = s.u;
  L.v[l] = s.v;
  L.z[l] = s.z;
  L.sx[l] = std::sin(s.x);
  L.cx[l] = std::cos(s.x);
}

}  // namespace

std::vector<EvolveResult> evolve_batch(std::span<const BatchMember> members, double tau_end,
                                       const LatticeParams& params,
                                       const IntegratorOptions& options) {
  if (members.empty() || members.size() > kBatchWidth) {
    throw std::invalid_argument("evolve_batch: batch must hold 1.." +
                                std::to_string(kBatchWidth) + " members");
  }
  const double tau0 = members.front().state.tau;
  for (const auto& m : members) {
    if (m.state.tau != tau0) throw std::invalid_argument("evolve_batch: members start at different tau");
    if (m.rng == nullptr || m.sink == nullptr) {
      throw std::invalid_argument("evolve_batch: member without stream or sink");
    }
  }

  const CoherentFlow flow(params);
  using Driver = TrajectoryDriver<CoherentFlow>;
  std::vector<Driver> drivers;
  drivers.reserve(members.size());
  for (const auto& m : members) drivers.emplace_back(flow, m.state, tau_end, options, *m.rng, *m.sink);

  // Steps free of events are handled here in bulk; a lane goes through its
  // driver only when something may happen in the step. Unused lanes idle in
  // the ground state.
  Lanes L{};
  Lanes prev{};
  alignas(64) double acc[kBatchWidth] = {};
  alignas(64) double thr[kBatchWidth] = {};
  alignas(64) double loud[kBatchWidth] = {};
  std::uint32_t active = 0;  // bit l set while lane l runs
  auto refresh = [&](std::size_t l) {
    const Driver& d = drivers[l];
    acc[l] = d.hazard();
    thr[l] = d.threshold();
    if (d.done()) active &= ~(1u << l);
  };
  auto reload = [&](std::size_t l) {
    load_lane(L, l, drivers[l].state());
    refresh(l);
  };
  for (std::size_t l = 0; l < kBatchWidth; ++l) {
    if (l < drivers.size()) {
      active |= 1u << l;
      reload(l);
    } else {
      load_lane(L, l, AtomState{});
      thr[l] = HUGE_VAL;
    }
  }

  auto grid_tau = [&](std::uint64_t k) {
    return std::min(tau0 + static_cast<double>(k) * options.dtau, tau_end);
  };
  const double max_p_h = kMaxShift / params.omega_r;
  std::uint64_t n = 0;
  unsigned since_resync = 0;
  while (active != 0) {
    const double tau_n = grid_tau(n);
    const double h = grid_tau(n + 1) - tau_n;
    const bool sample_due = options.sample_every > 0 && (n + 1) % options.sample_every == 0;
    step_lanes(L, prev, h, params, max_p_h, sample_due, acc, thr, loud);
    std::uint32_t attention = 0;
    for (std::size_t l = 0; l < kBatchWidth; ++l) {
      attention |= static_cast<std::uint32_t>(loud[l] != 0.0) << l;
    }
    ++n;
    attention &= active;
    if (++since_resync == kResyncSteps) {
      since_resync = 0;
      for (std::size_t l = 0; l < kBatchWidth; ++l) {
        L.sx[l] = std::sin(L.x[l]);
        L.cx[l] = std::cos(L.x[l]);
      }
    }

    while (attention != 0) {
      const auto l = static_cast<std::size_t>(std::countr_zero(attention));
      attention &= attention - 1;
      Driver& d = drivers[l];
      const AtomState start{prev.x[l], prev.p[l], prev.u[l], prev.v[l], prev.z[l], tau_n};
      d.resume(start, acc[l], n - 1);
      StepResult step;
      const bool batched = std::abs(start.p) * h < max_p_h;
      if (batched) {
        step.next = AtomState{L.x[l], L.p[l], L.u[l], L.v[l], L.z[l], tau_n + h};
        step.hazard = L.hazard[l];
      } else {
        step = flow.step(start, h);
      }
      // Keep the lane's carried sin/cos unless the driver replaced the state,
      // so that recording samples does not perturb the trajectory.
      if (d.advance(step) && batched) {
        refresh(l);
      } else {
        reload(l);
      }
    }
    if (!(grid_tau(n) < tau_end)) break;
  }

  std::vector<EvolveResult> results;
  results.reserve(drivers.size());
  for (std::size_t l = 0; l < drivers.size(); ++l) {
    Driver& d = drivers[l];
    if (active & (1u << l)) d.resume(AtomState{L.x[l], L.p[l], L.u[l], L.v[l], L.z[l], grid_tau(n)}, acc[l], n);
    results.push_back(d.result());
  }
  return results;
}

EvolveResult evolve(const AtomState& state, double tau_end, const LatticeParams& params,
                    const IntegratorOptions& options, RandomStream& rng, EventSink& sink) {
  params.validate();
  options.validate();
  if (!(tau_end > state.tau)) {
    throw std::invalid_argument("evolve: tau_end must exceed the current time");
  }
  const BatchMember member{state, &rng, &sink};
  return evolve_batch(std::span<const BatchMember>(&member, 1), tau_end, params, options).front();
}

}  // namespace latticewalk
