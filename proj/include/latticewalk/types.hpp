#ifndef LATTICEWALK_TYPES_HPP_
#define LATTICEWALK_TYPES_HPP_

#include <optional>
#include <stdexcept>
#include <string>

namespace latticewalk {

/// Raised for invalid parameters or configuration, detected before any work is done.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure detects a fault at run time.
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Semiclassical state of a two-level atom in a standing wave.
///
/// Position is measured in units of 1/k_f, momentum in units of hbar*k_f and
/// time in units of 1/Omega. (u, v, z) is the Bloch vector: synphase and
/// quadrature dipole components and the population inversion. Its length is
/// one under the coherent flow and after every spontaneous emission.
struct AtomState {
  double x = 0.0;
  double p = 0.0;
  double u = 0.0;
  double v = 0.0;
  double z = -1.0;
  double tau = 0.0;

  double bloch_norm2() const { return u * u + v * v + z * z; }
  bool finite() const;
};

/// Time derivatives of the five dynamical variables.
struct StateDerivative {
  double dx = 0.0;
  double dp = 0.0;
  double du = 0.0;
  double dv = 0.0;
  double dz = 0.0;
};

// Cesium D2 line (6S1/2 - 6P3/2).
inline constexpr double kCesiumWavelength = 852.1e-9;
inline constexpr double kCesiumMass = 2.20694695e-25;
inline constexpr double kDefaultRabiHz = 1e10;

/// Normalized lattice parameters plus the constants needed to report SI values.
struct LatticeParams {
  double delta = -0.001;  // (omega_f - omega_a) / Omega
  double gamma = 3.3e-3;  // Gamma / Omega
  double omega_r = 1e-5;  // hbar k_f^2 / (m_a Omega)

  std::optional<double> rabi_hz = kDefaultRabiHz;
  std::optional<double> wavelength_m = kCesiumWavelength;
  std::optional<double> atom_mass_kg = kCesiumMass;

  /// Throws ConfigError unless gamma >= 0, omega_r > 0 and all values finite.
  /// gamma == 0 is accepted: it switches spontaneous emission off.
  void validate() const;
};

/// One spontaneous-emission jump.
struct SpontaneousEvent {
  double tau = 0.0;
  AtomState pre_state;
  double recoil = 0.0;
  double interval = 0.0;  // since the previous jump or the trajectory start
  double post_energy = 0.0;
};

}  // namespace latticewalk

#endif  // LATTICEWALK_TYPES_HPP_
