#include "rsc/link.hpp"

#include <cmath>
#include <cstring>

#include "rsc/error.hpp"

namespace rsc {

QuantizedBlock quantize_block(const Tensor& y, const QuantizerConfig& q,
                              const CommonRandomness& cr, std::uint64_t offset) {
  Tensor u = dither(cr, y.size(), q.step(), offset).reshaped(y.shape());
  Tensor z = quantize(y, u, q);
  return {std::move(z), std::move(u)};
}

double codeword_power(const Tensor& z, std::size_t row) {
  const std::size_t K = z.cols();
  double s = 0;
  for (std::size_t c = 0; c < K; ++c) {
    const double v = z[row * K + c];
    s += v * v;
  }
  return s / static_cast<double>(K);
}

Tensor send_symbols(const Tensor& z, std::size_t row, std::size_t from, std::size_t to,
                    const ChannelConfig& channel, const CommonRandomness& cr,
                    std::uint64_t offset) {
  const std::size_t K = z.cols();
  if (from >= to || to > K) throw RateOutOfRange("symbols [" + std::to_string(from) + ", " +
                                                 std::to_string(to) + ") of " + std::to_string(K));
  Tensor slice({1, to - from});
  std::memcpy(slice.data(), z.data() + row * K + from, (to - from) * sizeof(float));
  return transmit(slice, to - from, channel, cr.channel_stream(), codeword_power(z, row),
                  offset + row * K + from);
}

Tensor send_block(const Tensor& z, std::size_t k, const ChannelConfig& channel,
                  const CommonRandomness& cr, std::uint64_t offset) {
  const std::size_t K = z.cols();
  if (k < 1 || k > K) throw RateOutOfRange("rate " + std::to_string(k));
  Tensor out({z.rows(), K});
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const Tensor got = send_symbols(z, r, 0, k, channel, cr, offset);
    std::memcpy(out.data() + r * K, got.data(), k * sizeof(float));
  }
  return out;
}

Tensor reconstruct(const Codec& codec, const Tensor& w, std::size_t k,
                   const QuantizerConfig& q, const ChannelConfig& channel,
                   const CommonRandomness& cr, const OneShotOptions& opts,
                   std::uint64_t offset) {
  const Tensor y = codec.encode(w);
  if (!opts.quantize) return codec.decode(send_block(y, k, channel, cr, offset));
  if (opts.proxy) {
    // y + fresh uniform noise in place of quantization.
    Tensor noisy = y;
    const RngStream s = cr.dither_stream().derive(0x9A0C);
    const double half = q.step() / 2;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      noisy[i] += uniform_to_range(s.uniform_at(offset + i), -half, half);
    }
    return codec.decode(send_block(noisy, k, channel, cr, offset));
  }
  const QuantizedBlock qb = quantize_block(y, q, cr, offset);
  const Tensor received = send_block(qb.z, k, channel, cr, offset);
  return codec.decode(add_dither_back(received, qb.dither, k));
}

std::uint64_t digest(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(t.data());
  for (std::size_t i = 0; i < t.size() * sizeof(float); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rsc
