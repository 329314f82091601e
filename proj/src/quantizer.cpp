#include "rsc/quantizer.hpp"

#include <algorithm>
#include <cmath>

namespace rsc {
namespace {
constexpr std::uint64_t kDitherTag = 0xD17E5;
constexpr std::uint64_t kChannelTag = 0xC4A77E1;
}  // namespace

RngStream CommonRandomness::dither_stream() const {
  return RngStream(seed, session_id).derive(kDitherTag);
}

RngStream CommonRandomness::channel_stream() const {
  return RngStream(seed, session_id).derive(kChannelTag);
}

QuantizerConfig::QuantizerConfig(int levels) : levels_(levels) {
  if (levels < 2) throw InvalidRange("quantizer needs at least 2 levels");
  step_ = 2.0 / (levels - 1);
}

int QuantizerConfig::index_bits() const noexcept {
  int bits = 0;
  while ((1 << bits) < levels_) ++bits;
  return bits;
}

float QuantizerConfig::value(int index) const noexcept {
  const int top = levels_ - 1;
  return static_cast<float>(static_cast<double>(2 * index - top) / top);
}

int QuantizerConfig::index_of(double v) const noexcept {
  const double i = std::round((v + 1.0) / step_);
  return static_cast<int>(std::clamp(i, 0.0, static_cast<double>(levels_ - 1)));
}

std::vector<int> LatentCode::indices() const {
  std::vector<int> out(active_k);
  for (std::size_t i = 0; i < active_k; ++i) out[i] = config.index_of(values[i]);
  return out;
}

void LatentCode::validate() const {
  if (capacity == 0 || values.size() != capacity) {
    throw ShapeMismatch("latent code holds " + std::to_string(values.size()) +
                        " values for capacity " + std::to_string(capacity));
  }
  if (active_k < 1 || active_k > capacity) {
    throw RateOutOfRange("active_k " + std::to_string(active_k) + " outside 1.." +
                         std::to_string(capacity));
  }
  for (std::size_t i = 0; i < capacity; ++i) {
    const bool ok = i < active_k ? values[i] == config.value(config.index_of(values[i]))
                                 : values[i] == 0.0f;
    if (!ok) throw DomainError("latent value " + std::to_string(i) + " is off the lattice");
  }
}

Tensor dither(const CommonRandomness& cr, std::size_t n, double step, std::uint64_t offset) {
  if (!(step > 0)) throw InvalidRange("dither step must be positive");
  const RngStream stream = cr.dither_stream();
  const double half = step / 2;
  Tensor u({n});
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = uniform_to_range(stream.uniform_at(offset + i), -half, half);
  }
  return u;
}

Tensor quantize(const Tensor& y, const Tensor& u, const QuantizerConfig& cfg) {
  require_same_shape(y, u, "quantize");
  Tensor z(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    z[i] = cfg.value(cfg.index_of(static_cast<double>(y[i]) - static_cast<double>(u[i])));
  }
  return z;
}

Tensor add_dither_back(const Tensor& z_hat, const Tensor& u) {
  require_same_shape(z_hat, u, "add_dither_back");
  Tensor out(z_hat.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z_hat[i] + u[i];
  return out;
}

Tensor add_dither_back(const Tensor& z_hat, const Tensor& u, std::size_t active_k) {
  require_same_shape(z_hat, u, "add_dither_back");
  const std::size_t cols = z_hat.cols();
  Tensor out = z_hat;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < std::min(active_k, cols); ++c) {
      out[r * cols + c] += u[r * cols + c];
    }
  }
  return out;
}

}  // namespace rsc
