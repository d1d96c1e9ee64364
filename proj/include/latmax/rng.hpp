#pragma once

#include <array>
#include <cstdint>

namespace latmax {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., Random123).
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

PhiloxKey key_from_seed(std::uint64_t seed);

// Mix of a 64-bit value (splitmix64 finalizer); used to derive child seeds.
std::uint64_t mix64(std::uint64_t x);

/// An unbounded random stream addressed by (seed, stream id, lane). Stream
/// contents depend only on that address, never on how many other streams
/// exist or in what order they are consumed.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t lane = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double gamma(double shape);
  double chi_squared(double nu) { return 2.0 * gamma(0.5 * nu); }

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter ctr_;
  PhiloxCounter buf_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace latmax
