#include "latticewalk/types.hpp"

#include <cmath>

namespace latticewalk {

bool AtomState::finite() const {
  return std::isfinite(x) && std::isfinite(p) && std::isfinite(u) && std::isfinite(v) &&
         std::isfinite(z) && std::isfinite(tau);
}

void LatticeParams::validate() const {
  if (!std::isfinite(delta)) throw ConfigError("params.delta must be finite");
  if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("params.gamma must be >= 0");
  if (!std::isfinite(omega_r) || omega_r <= 0.0) throw ConfigError("params.omega_r must be > 0");
}

}  // namespace latticewalk
