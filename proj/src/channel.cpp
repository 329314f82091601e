#include "rsc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rsc {

ChannelConfig parse_channel(const std::string& text) {
  if (text == "noiseless" || text == "inf" || text == "none") return ChannelConfig::clean();
  try {
    std::size_t used = 0;
    const double db = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return ChannelConfig::awgn(db);
  } catch (const std::exception&) {
    throw ConfigError("channel SNR must be a dB value or 'noiseless', got '" + text + "'");
  }
}

std::string to_string(const ChannelConfig& cfg) {
  if (cfg.noiseless()) return "noiseless";
  std::ostringstream os;
  os << *cfg.snr_db;
  return os.str();
}

double signal_power(const Tensor& z, std::size_t active_k) {
  const std::size_t cols = z.cols();
  const std::size_t k = std::min(active_k, cols);
  if (k == 0) return 0.0;
  double acc = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double v = z[r * cols + c];
      acc += v * v;
    }
  }
  return acc / static_cast<double>(z.rows() * k);
}

double noise_variance(const ChannelConfig& cfg, double empirical_power) {
  if (cfg.noiseless()) return 0.0;
  const double p = cfg.power_mode == PowerMode::kNominal ? 1.0 : empirical_power;
  return p * std::pow(10.0, -*cfg.snr_db / 10.0);
}

Tensor channel_noise(const Shape& shape, std::size_t active_k, double sigma,
                     const RngStream& noise, std::uint64_t offset) {
  Tensor n(shape);
  const std::size_t cols = n.cols();
  const std::size_t k = std::min(active_k, cols);
  for (std::size_t r = 0; r < n.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const std::uint64_t idx = offset + r * cols + c;
      n[r * cols + c] = static_cast<float>(sigma * noise.gaussian_at(idx));
    }
  }
  return n;
}

Tensor transmit(const Tensor& z, std::size_t active_k, const ChannelConfig& cfg,
                const RngStream& noise, std::optional<double> reference_power,
                std::uint64_t offset) {
  require_finite(z, "transmit input");
  const std::size_t cols = z.cols();
  const std::size_t k = std::min(active_k, cols);
  Tensor out = z;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::fill(out.data() + r * cols + k, out.data() + (r + 1) * cols, 0.0f);
  }
  if (cfg.noiseless()) return out;
  const double power = reference_power ? *reference_power : signal_power(z, k);
  const double sigma = std::sqrt(noise_variance(cfg, power));
  const Tensor n = channel_noise(z.shape(), k, sigma, noise, offset);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += n[i];
  return out;
}

Tensor transmit(const Tensor& z, const ChannelConfig& cfg, const RngStream& noise) {
  return transmit(z, z.cols(), cfg, noise);
}

double measure_snr(const Tensor& z, const Tensor& z_hat) {
  require_same_shape(z, z_hat, "measure_snr");
  double sig = 0, err = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = z[i];
    const double e = static_cast<double>(z_hat[i]) - a;
    sig += a * a;
    err += e * e;
  }
  if (err == 0.0) throw ZeroNoise("received signal equals the transmitted one");
  return 10.0 * std::log10(sig / err);
}

}  // namespace rsc
