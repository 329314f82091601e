#include "rsc/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace rsc {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// splitmix64 finalizer; used only to scatter derived stream ids.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void check_range(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidRange("uniform range requires lo < hi, got [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
}

void check_stddev(double stddev) {
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) {
    throw InvalidRange("gaussian stddev must be >= 0, got " + std::to_string(stddev));
  }
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

RngStream RngStream::derive(std::uint64_t tag) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(tag + 0x632BE59BD9B4E019ull)), 0);
}

std::array<std::uint32_t, 4> RngStream::block_at(std::uint64_t index) const {
  return philox4x32({static_cast<std::uint32_t>(index),
                     static_cast<std::uint32_t>(index >> 32),
                     static_cast<std::uint32_t>(stream_id_),
                     static_cast<std::uint32_t>(stream_id_ >> 32)},
                    {static_cast<std::uint32_t>(seed_),
                     static_cast<std::uint32_t>(seed_ >> 32)});
}

double RngStream::uniform_at(std::uint64_t index) const {
  const auto b = block_at(index);
  return to_unit(b[0], b[1]);
}

double RngStream::gaussian_at(std::uint64_t index) const {
  const auto b = block_at(index);
  // 1 - u lies in (0,1], keeping the log finite.
  const double u1 = 1.0 - to_unit(b[0], b[1]);
  const double u2 = to_unit(b[2], b[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::next_u64() {
  const auto b = block_at(counter_++);
  return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
}

double RngStream::next_uniform() { return uniform_at(counter_++); }

double RngStream::next_gaussian() { return gaussian_at(counter_++); }

std::uint64_t RngStream::next_below(std::uint64_t n) {
  const std::uint64_t limit = n * (UINT64_MAX / n);
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x < limit) return x % n;
  }
}

float uniform_to_range(double u, double lo, double hi) {
  float v = static_cast<float>(lo + (hi - lo) * u);
  const float fhi = static_cast<float>(hi);
  if (v >= fhi) v = std::nextafter(fhi, static_cast<float>(lo));
  const float flo = static_cast<float>(lo);
  if (v < flo) v = flo;
  return v;
}

Tensor draw_uniform(RngStream& rng, std::size_t n, double lo, double hi) {
  check_range(lo, hi);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = uniform_to_range(rng.next_uniform(), lo, hi);
  return out;
}

Tensor draw_gaussian(RngStream& rng, std::size_t n, double mean, double stddev) {
  check_stddev(stddev);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(mean + stddev * rng.next_gaussian());
  }
  return out;
}

Tensor64 draw_uniform64(RngStream& rng, std::size_t n, double lo, double hi) {
  check_range(lo, hi);
  Tensor64 out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * rng.next_uniform();
  return out;
}

Tensor64 draw_gaussian64(RngStream& rng, std::size_t n, double mean, double stddev) {
  check_stddev(stddev);
  Tensor64 out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = mean + stddev * rng.next_gaussian();
  return out;
}

}  // namespace rsc
