#pragma once

#include <array>
#include <cstdint>

namespace fconv {

/// Philox4x32-10 counter-based generator. A stream is identified by
/// (seed, stream_id); draws within a stream advance a 64-bit block counter,
/// so streams never overlap and can be created in any order or thread.
class Philox {
 public:
  using result_type = std::uint32_t;

  Philox(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }

  result_type operator()();

  /// Uniform double in (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// One Philox round-set applied to (counter, key); exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

/// Stream id combining an outer index (e.g. the N of a sweep) and a replicate.
constexpr std::uint64_t substream(std::uint32_t outer, std::uint32_t replicate) {
  return (static_cast<std::uint64_t>(outer) << 32) | replicate;
}

}  // namespace fconv
