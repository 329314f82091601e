#pragma once

// Subtractive dithered quantization on the L-level lattice spanning [-1, 1].
//
// Encoder:  z = Q(y - u)        Decoder:  ŷ = ẑ + u
//
// u ~ U[-Δ/2, Δ/2) is regenerated bit-exactly on both sides from shared
// seeds, so with a clean channel ŷ - y is uniform on [-Δ/2, Δ/2] and
// independent of y wherever Q does not saturate.

#include <cstdint>
#include <vector>

#include "rsc/numerics/graph.hpp"
#include "rsc/numerics/rng.hpp"
#include "rsc/numerics/tensor.hpp"

namespace rsc {

// Shared randomness for one encoder/decoder pair. `rc_bits` records the
// nominal budget of the shared random index and is carried for reporting.
struct CommonRandomness {
  std::uint64_t seed = 0;
  std::uint64_t session_id = 0;
  double rc_bits = 64.0;

  RngStream dither_stream() const;
  RngStream channel_stream() const;
};

class QuantizerConfig {
 public:
  explicit QuantizerConfig(int levels = 16);

  int levels() const noexcept { return levels_; }
  double step() const noexcept { return step_; }
  // Bits needed per transmitted index: ceil(log2 L).
  int index_bits() const noexcept;

  // Lattice point i ∈ [0, L): -1 + iΔ, evaluated as (2i - (L-1))/(L-1) so the
  // endpoints are exactly ±1.
  float value(int index) const noexcept;
  // Nearest lattice index to v, saturating at the ends.
  int index_of(double v) const noexcept;

 private:
  int levels_;
  double step_;
};

// The transmitted object: lattice values of the first `active_k` latent
// coordinates, zeros beyond.
struct DitherRef {
  std::uint64_t seed = 0;
  std::uint64_t session_id = 0;
  std::uint64_t offset = 0;
};

struct LatentCode {
  Tensor values;  // [K]
  std::size_t active_k = 0;
  std::size_t capacity = 0;
  DitherRef dither_ref;
  QuantizerConfig config;

  std::vector<int> indices() const;  // first active_k lattice indices
  // Throws RateOutOfRange / DomainError when the invariant is broken.
  void validate() const;
};

// n dither values for block positions offset..offset+n-1 of the shared
// stream. Every value lies in [-Δ/2, Δ/2).
Tensor dither(const CommonRandomness& cr, std::size_t n, double step, std::uint64_t offset = 0);

// z = lattice value nearest to (y - u), ties away from zero, saturating.
Tensor quantize(const Tensor& y, const Tensor& u, const QuantizerConfig& cfg);

// ŷ = ẑ + u.
Tensor add_dither_back(const Tensor& z_hat, const Tensor& u);
// ŷ = ẑ + u on the first `active_k` columns only; dropped coordinates stay 0.
Tensor add_dither_back(const Tensor& z_hat, const Tensor& u, std::size_t active_k);

// Additive-noise stand-in for quantization during training: y + u' with a
// fresh u' ~ U[-Δ/2, Δ/2). The noise is a graph constant, so d/dy = 1.
template <typename T>
Var<T> training_proxy(Var<T> y, RngStream& rng, double step) {
  BasicTensor<T> noise(y.shape());
  const double half = step / 2;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    if constexpr (std::is_same_v<T, float>) {
      noise[i] = uniform_to_range(rng.next_uniform(), -half, half);
    } else {
      noise[i] = -half + step * rng.next_uniform();
    }
  }
  return ad::add(y, y.graph->constant(std::move(noise)));
}

}  // namespace rsc
