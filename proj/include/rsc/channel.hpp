#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rsc/numerics/rng.hpp"
#include "rsc/numerics/tensor.hpp"

namespace rsc {

enum class PowerMode {
  kNominal,    // P = 1: lattice symbols live in [-1, 1]
  kEmpirical,  // P = mean z² over the transmitted coordinates
};

struct ChannelConfig {
  std::optional<double> snr_db;  // nullopt: noiseless
  PowerMode power_mode = PowerMode::kEmpirical;

  bool noiseless() const noexcept { return !snr_db.has_value(); }
  static ChannelConfig clean() { return {}; }
  static ChannelConfig awgn(double db, PowerMode mode = PowerMode::kEmpirical) {
    return {db, mode};
  }
};

// "noiseless" or a dB value.
ChannelConfig parse_channel(const std::string& text);
std::string to_string(const ChannelConfig& cfg);

// Mean z² over the first `active_k` columns of every row.
double signal_power(const Tensor& z, std::size_t active_k);

// σ² = P · 10^(-snr/10), with P taken from the config's power mode unless a
// reference power is supplied. Zero for a noiseless channel.
double noise_variance(const ChannelConfig& cfg, double empirical_power);

// Noise realization for a [rows × K] block: entry (r, c) is σ·N(0,1) drawn
// from block offset + r·K + c of `noise`, for c < active_k; zero elsewhere.
// Entry values do not depend on active_k, so a longer transmission extends a
// shorter one.
Tensor channel_noise(const Shape& shape, std::size_t active_k, double sigma,
                     const RngStream& noise, std::uint64_t offset = 0);

// ẑ = z + n_c on the first active_k coordinates of each row; dropped
// coordinates are never sent and come back as exact zeros.
//
// `reference_power` overrides the empirical power estimate. Rateless
// transmission passes the power of the whole codeword here so the noise
// level of a symbol does not depend on how many symbols end up being sent.
Tensor transmit(const Tensor& z, std::size_t active_k, const ChannelConfig& cfg,
                const RngStream& noise, std::optional<double> reference_power = std::nullopt,
                std::uint64_t offset = 0);
Tensor transmit(const Tensor& z, const ChannelConfig& cfg, const RngStream& noise);

// 10·log10(Σz² / Σ(ẑ - z)²). ZeroNoise when ẑ == z.
double measure_snr(const Tensor& z, const Tensor& z_hat);

}  // namespace rsc
