#pragma once

// Inference-time transmission path shared by one-shot evaluation and the
// rateless session, so both produce the same bits.
//
// Row r of a block is its own codeword. It uses dither positions and noise
// positions offset + r·K + c, and its noise level is set from the power of
// the full K-symbol codeword, so a symbol's received value does not depend
// on how many symbols are eventually sent.

#include <cstdint>
#include <vector>

#include "rsc/channel.hpp"
#include "rsc/models.hpp"
#include "rsc/quantizer.hpp"

namespace rsc {

struct QuantizedBlock {
  Tensor z;       // [B × K] lattice values
  Tensor dither;  // [B × K]
};

// Dithered quantization of a [B × K] latent block.
QuantizedBlock quantize_block(const Tensor& y, const QuantizerConfig& q,
                              const CommonRandomness& cr, std::uint64_t offset = 0);

// Mean square of row r over all K coordinates.
double codeword_power(const Tensor& z, std::size_t row);

// Sends columns [from, to) of row `row` of z; returns [1 × (to - from)].
Tensor send_symbols(const Tensor& z, std::size_t row, std::size_t from, std::size_t to,
                    const ChannelConfig& channel, const CommonRandomness& cr,
                    std::uint64_t offset = 0);

// Sends the first k symbols of every row; the rest come back as zeros.
Tensor send_block(const Tensor& z, std::size_t k, const ChannelConfig& channel,
                  const CommonRandomness& cr, std::uint64_t offset = 0);

struct OneShotOptions {
  // Continuous latent without quantization (the TC/SC baselines, or the
  // RSC training proxy when `proxy` is set).
  bool quantize = true;
  bool proxy = false;
};

// encode → quantize (or not) → send k symbols → add dither back → decode.
Tensor reconstruct(const Codec& codec, const Tensor& w, std::size_t k,
                   const QuantizerConfig& q, const ChannelConfig& channel,
                   const CommonRandomness& cr, const OneShotOptions& opts = {},
                   std::uint64_t offset = 0);

// 64-bit FNV-1a over the raw float bytes.
std::uint64_t digest(const Tensor& t);

}  // namespace rsc
