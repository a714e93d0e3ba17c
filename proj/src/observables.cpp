#include "latticewalk/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace latticewalk {

namespace {
constexpr double kHbar = 1.054571817e-34;
}

double energy(const AtomState& s, const LatticeParams& params) {
  return energy(s.x, s.p, s.u, s.z, params);
}

double coherent_energy_rate(const AtomState& s, const LatticeParams& params) {
  return 0.25 * params.delta * params.gamma * (s.u * s.u + s.v * s.v) -
         0.5 * params.gamma * s.u * s.z * std::cos(s.x);
}

double pseudoenergy(double h, double z2_avg, double tau, double tau_jump,
                    const LatticeParams& params) {
  return h - 0.25 * params.delta * params.gamma * z2_avg * (tau - tau_jump);
}

double jump_energy_change(const AtomState& s, double recoil, const LatticeParams& params) {
  const double wr = params.omega_r;
  return wr * s.p * recoil + 0.5 * wr * recoil * recoil + 0.5 * params.delta +
         s.u * std::cos(s.x) + 0.5 * params.delta * s.z;
}

PseudoenergyTracker::PseudoenergyTracker(const LatticeParams& params, double window)
    : params_(params), window_(window) {
  if (window_ <= 0.0) {
    window_ = params.gamma > 0.0 ? 20.0 / params.gamma : 1e300;
  }
}

void PseudoenergyTracker::reset(const AtomState& post_jump) {
  tau_jump_ = post_jump.tau;
  last_value_ = 1.0 - post_jump.z * post_jump.z;
  history_.clear();
  history_.push_back({post_jump.tau, 0.0});
}

double PseudoenergyTracker::integral_at(double tau) const {
  if (tau <= history_.front().tau) return history_.front().integral;
  // Linear interpolation of the cumulative integral between observations.
  for (std::size_t i = 1; i < history_.size(); ++i) {
    const Point& b = history_[i];
    if (b.tau >= tau) {
      const Point& a = history_[i - 1];
      const double w = (tau - a.tau) / (b.tau - a.tau);
      return a.integral + w * (b.integral - a.integral);
    }
  }
  return history_.back().integral;
}

EnergyReading PseudoenergyTracker::observe(const AtomState& s) {
  if (history_.empty()) reset(s);
  const double value = 1.0 - s.z * s.z;
  const Point& last = history_.back();
  if (s.tau > last.tau) {
    history_.push_back({s.tau, last.integral + 0.5 * (value + last_value_) * (s.tau - last.tau)});
  }
  last_value_ = value;

  const double start = std::max(tau_jump_, s.tau - window_);
  while (history_.size() > 2 && history_[1].tau <= start) history_.pop_front();

  EnergyReading reading;
  reading.tau = s.tau;
  reading.h = energy(s, params_);
  const double span = s.tau - start;
  reading.z2_avg = span > 0.0 ? (history_.back().integral - integral_at(start)) / span : value;
  reading.h_tilde = pseudoenergy(reading.h, reading.z2_avg, s.tau, tau_jump_, params_);
  return reading;
}

SiValue to_si(double value, SiKind kind, const LatticeParams& params) {
  switch (kind) {
    case SiKind::time: {
      if (!params.rabi_hz || *params.rabi_hz <= 0.0) {
        throw ConfigError("params.rabi_hz is required for time conversion");
      }
      return {value / *params.rabi_hz, "s"};
    }
    case SiKind::velocity: {
      if (!params.wavelength_m || *params.wavelength_m <= 0.0) {
        throw ConfigError("params.wavelength_m is required for velocity conversion");
      }
      if (!params.atom_mass_kg || *params.atom_mass_kg <= 0.0) {
        throw ConfigError("params.atom_mass_kg is required for velocity conversion");
      }
      const double k = 2.0 * std::numbers::pi / *params.wavelength_m;
      return {value * kHbar * k / *params.atom_mass_kg, "m/s"};
    }
    case SiKind::momentum:
      return {value, "hbar*k_f"};
  }
  return {value, ""};
}

double tau_to_microseconds(double tau, const LatticeParams& params) {
  return to_si(tau, SiKind::time, params).value * 1e6;
}

FlaggedValue analytic_friction(double p, const LatticeParams& params) {
  FlaggedValue f;
  f.in_validity_range = std::abs(p) >= params.gamma / (2.0 * params.omega_r);
  f.value = params.delta * params.gamma / (2.0 * params.omega_r * p);
  return f;
}

}  // namespace latticewalk
