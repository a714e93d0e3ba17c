#ifndef LATTICEWALK_RNG_HPP_
#define LATTICEWALK_RNG_HPP_

#include <cstdint>
#include <random>

namespace latticewalk {

/// Reproducible random stream owned by one trajectory.
///
/// Floating-point conversions are done here rather than with the standard
/// distributions so that draws are identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1); safe to pass to log().
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// Stream for one trajectory of an ensemble. The pair (master_seed,
/// trajectory_id) is expanded through std::seed_seq, so neighbouring ids give
/// unrelated engine states.
RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t trajectory_id);

}  // namespace latticewalk

#endif  // LATTICEWALK_RNG_HPP_
