#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace qhl {

// Philox4x32-10 block function (Salmon et al., counter-based).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// SplitMix64 finalizer; used to spread stream identifiers.
std::uint64_t mix64(std::uint64_t x);

// Counter-based random stream. The (seed, stream_id) pair fully determines the
// sequence, so replication r of an experiment always sees the same numbers no
// matter which worker thread runs it or in which order.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // Unit-rate exponential.
  double exponential();
  // Fair +1 / -1.
  int sign();

  // Independent child stream, e.g. the second Brownian motion of a path.
  RandomStream substream(std::uint64_t k) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qhl
