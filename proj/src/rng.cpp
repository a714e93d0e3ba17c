#include "latticewalk/rng.hpp"

namespace latticewalk {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    0x6c77u};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : engine_(seeded_engine(seed, ~0ull)) {}

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : engine_(seeded_engine(master_seed, stream_id)) {}

RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t trajectory_id) {
  return RandomStream(master_seed, trajectory_id);
}

}  // namespace latticewalk
