#include "rsc/ratecontrol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rsc {
namespace {

void check_schedule(std::size_t max_rate, double beta) {
  if (max_rate < 1) throw InvalidRange("maximum rate K must be >= 1");
  if (!(beta > 0) || !std::isfinite(beta)) {
    throw InvalidRange("drop exponent beta must be positive");
  }
}

}  // namespace

std::vector<double> rate_weights(std::size_t max_rate, double beta) {
  check_schedule(max_rate, beta);
  const double kk = static_cast<double>(max_rate);
  auto cdf = [beta](double psi) { return std::pow(psi, beta); };
  std::vector<double> w(max_rate);
  for (std::size_t k = 1; k <= max_rate; ++k) {
    const double d = kk - static_cast<double>(k);
    w[k - 1] = cdf((d + 1) / kk) - cdf(d / kk);
  }
  return w;
}

RateSchedule::RateSchedule(std::size_t max_rate_, double beta_)
    : max_rate(max_rate_), beta(beta_), weights(rate_weights(max_rate_, beta_)) {}

double RateSchedule::drop_cdf(double psi) const {
  return std::pow(std::clamp(psi, 0.0, 1.0), beta);
}

std::size_t drop_depth(const RateSchedule& sched, double u) {
  const double psi = std::pow(u, 1.0 / sched.beta);
  const auto d = static_cast<std::size_t>(std::floor(psi * static_cast<double>(sched.max_rate)));
  return std::min(d, sched.max_rate - 1);
}

std::size_t sample_rate(const RateSchedule& sched, RngStream& rng) {
  return sched.max_rate - drop_depth(sched, rng.next_uniform());
}

Tensor tail_drop(const Tensor& z, std::size_t k) {
  const std::size_t cap = z.cols();
  if (k < 1 || k > cap) {
    throw RateOutOfRange("rate " + std::to_string(k) + " outside 1.." + std::to_string(cap));
  }
  Tensor out = z;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::fill(out.data() + r * cap + k, out.data() + (r + 1) * cap, 0.0f);
  }
  return out;
}

}  // namespace rsc
