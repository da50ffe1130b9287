#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace tdcc {

/**
 * Philox4x32-10 counter-based generator (Salmon et al., SC'11), exposed as a
 * 64-bit UniformRandomBitGenerator. The key is the 64-bit seed; the 128-bit
 * counter starts at `stream << 64` so distinct streams never overlap.
 * Output is identical on every platform.
 */
class Philox {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Raw bijection: ten rounds on `counter` under `key`.
  static Block bijection(Block counter, std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  Block counter_;
  Block buffer_{};
  int used_ = 2;  // 64-bit words consumed from buffer_
};

}  // namespace tdcc
