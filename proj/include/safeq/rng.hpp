#ifndef SAFEQ_RNG_HPP
#define SAFEQ_RNG_HPP

#include <array>
#include <cstdint>

namespace safeq {

// Deterministic, platform-independent random stream.
//
// Generator: xoshiro256++ seeded through SplitMix64 from
// (master_seed, stream_id). Equal (master_seed, stream_id) pairs produce
// identical 64-bit sequences on every platform. Each component of a run
// (environment, behavior policy, agent, evaluation) owns its own stream
// so that changing one consumer does not shift the others.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Derives an independent stream from this stream's identity.
  RngStream substream(std::uint64_t offset) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double next_double();

  // Uniform integer in [0, n), n >= 1.
  int next_int(int n);

  // Uniform on [lo, hi).
  double next_uniform(double lo, double hi);

  // Standard normal via the Marsaglia polar method (spare cached).
  double next_gaussian();

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> s_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace safeq

#endif  // SAFEQ_RNG_HPP
