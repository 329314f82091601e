#pragma once

// Tail-drop rate control.
//
// The number of dropped trailing coordinates D follows the power law
// Pr(D < ψK) = ψ^β, discretized as D = floor(ψK) with ψ = U^(1/β). The kept
// length is k = K - D ∈ {1..K}. The per-rate loss weights ω_k are the mass
// of that discrete law at D = K - k, so the ω-weighted sum of per-rate losses
// equals the expected loss under sampled rates.

#include <cstddef>
#include <vector>

#include "rsc/numerics/rng.hpp"
#include "rsc/numerics/tensor.hpp"

namespace rsc {

inline constexpr double kDefaultDropExponent = 0.67;

// Weight of rate k is weights[k - 1].
std::vector<double> rate_weights(std::size_t max_rate, double beta);

struct RateSchedule {
  std::size_t max_rate = 12;
  double beta = kDefaultDropExponent;
  std::vector<double> weights;

  RateSchedule() : RateSchedule(12, kDefaultDropExponent) {}
  RateSchedule(std::size_t max_rate, double beta);

  double weight(std::size_t k) const { return weights.at(k - 1); }
  // Pr(D < ψK) under the continuous law.
  double drop_cdf(double psi) const;
};

std::size_t sample_rate(const RateSchedule& sched, RngStream& rng);
// Drop depth implied by a uniform draw u ∈ [0,1).
std::size_t drop_depth(const RateSchedule& sched, double u);

// Keeps the first k coordinates of every row and zeroes the rest.
Tensor tail_drop(const Tensor& z, std::size_t k);

}  // namespace rsc
