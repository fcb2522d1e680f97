#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace seqbreak {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The output is a pure function of (key, stream, position), so every
/// Monte-Carlo replication can own an independent substream and the result
/// of a parallel run does not depend on scheduling.
class Philox4x32 {
public:
  using result_type = std::uint64_t;

  Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  void discard(std::uint64_t n) noexcept;

  /// One raw block: the four 32-bit words for a given 128-bit counter.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  unsigned buffered_ = 0;
};

using Rng = Philox4x32;

/// Purpose tags that keep the substreams of different consumers disjoint.
enum class StreamTag : std::uint64_t {
  wiener_path = 1,
  quantile_error = 2,
  bootstrap_draw = 3,
  bootstrap_select = 4,
  scenario = 5,
  bridge = 6,
  test = 99,
};

/// 64-bit finaliser from SplitMix64.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Generator for substream (tag, index, sub) under a run seed.
Rng substream(std::uint64_t seed, StreamTag tag, std::uint64_t index,
              std::uint64_t sub = 0) noexcept;

} // namespace seqbreak
