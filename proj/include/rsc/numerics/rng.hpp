#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "rsc/numerics/tensor.hpp"

namespace rsc {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Pure function of (key, counter); no state, so identical inputs give
// identical blocks on every platform.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Counter-based random stream. The seed is the Philox key, the stream id
// occupies the high half of the counter and `counter` walks the low half,
// so distinct stream ids never overlap.
//
// Streams are cheap values. Do not share one between threads; derive()
// a child per worker instead.
class RngStream {
 public:
  constexpr RngStream() = default;
  constexpr RngStream(std::uint64_t seed, std::uint64_t stream_id,
                      std::uint64_t counter = 0)
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Independent child stream keyed on (this stream, tag). Does not advance
  // the parent.
  RngStream derive(std::uint64_t tag) const;

  // Random access: block `index` of this stream, independent of the cursor.
  std::array<std::uint32_t, 4> block_at(std::uint64_t index) const;
  // Uniform in [0,1) with 53 random bits, drawn from block `index`.
  double uniform_at(std::uint64_t index) const;
  // Standard normal from block `index` (Box-Muller, cosine branch).
  double gaussian_at(std::uint64_t index) const;

  // Sequential draws; each consumes one block.
  std::uint64_t next_u64();
  double next_uniform();  // [0,1)
  double next_gaussian();
  // Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t next_below(std::uint64_t n);

  void skip(std::uint64_t blocks) noexcept { counter_ += blocks; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;
};

// n values uniform on [lo, hi). InvalidRange unless lo < hi.
Tensor draw_uniform(RngStream& rng, std::size_t n, double lo, double hi);
// n values from N(mean, stddev²). InvalidRange if stddev < 0.
Tensor draw_gaussian(RngStream& rng, std::size_t n, double mean, double stddev);

// Same draws in double precision, used by oracles and moment tests.
Tensor64 draw_uniform64(RngStream& rng, std::size_t n, double lo, double hi);
Tensor64 draw_gaussian64(RngStream& rng, std::size_t n, double mean, double stddev);

// Maps u ∈ [0,1) to [lo, hi) in float, never returning hi after rounding.
float uniform_to_range(double u, double lo, double hi);

}  // namespace rsc
