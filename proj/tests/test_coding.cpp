#include <doctest.h>

#include <cmath>

#include "rsc/channel.hpp"
#include "rsc/quantizer.hpp"
#include "rsc/ratecontrol.hpp"

using namespace rsc;

TEST_SUITE("quantizer") {

TEST_CASE("lattice endpoints and spacing") {
  const QuantizerConfig q3(3);
  CHECK(q3.step() == doctest::Approx(1.0));
  CHECK(q3.value(0) == -1.0f);
  CHECK(q3.value(1) == 0.0f);
  CHECK(q3.value(2) == 1.0f);
  const QuantizerConfig q16(16);
  CHECK(q16.value(0) == -1.0f);
  CHECK(q16.value(15) == 1.0f);
  CHECK(q16.index_bits() == 4);
  CHECK(QuantizerConfig(5).index_bits() == 3);
  CHECK_THROWS_AS(QuantizerConfig(1), InvalidRange);
}

TEST_CASE("quantize saturates and rounds to the nearest point") {
  const QuantizerConfig q(3);
  const Tensor y = Tensor::vector({0.2f, 0.7f, 5.0f, -5.0f});
  const Tensor z = quantize(y, Tensor({4}), q);
  CHECK(z[0] == 0.0f);
  CHECK(z[1] == 1.0f);
  CHECK(z[2] == 1.0f);
  CHECK(z[3] == -1.0f);
}

TEST_CASE("dither stays in [-step/2, step/2) and is reproducible") {
  const CommonRandomness cr{5, 9};
  const Tensor u = dither(cr, 10000, 0.5);
  for (float v : u.values()) {
    CHECK(v >= -0.25f);
    CHECK(v < 0.25f);
  }
  CHECK(dither(cr, 10000, 0.5) == u);
  // Offsets address the same stream.
  const Tensor tail = dither(cr, 10, 0.5, 100);
  for (std::size_t i = 0; i < 10; ++i) CHECK(tail[i] == u[100 + i]);
  CHECK_FALSE(dither(CommonRandomness{5, 10}, 10, 0.5) == dither(cr, 10, 0.5));
}

TEST_CASE("subtractive dither error is bounded for in-range inputs") {
  const QuantizerConfig q(16);
  const CommonRandomness cr{1, 1};
  RngStream rng(3, 3);
  const Tensor y = draw_uniform(rng, 5000, -(1 - q.step() / 2), 1 - q.step() / 2);
  const Tensor u = dither(cr, 5000, q.step());
  const Tensor y_hat = add_dither_back(quantize(y, u, q), u);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(std::abs(y_hat[i] - y[i]) <= q.step() / 2 + 1e-6);
  }
}

TEST_CASE("latent code invariant") {
  const QuantizerConfig q(3);
  LatentCode c{Tensor::vector({1, -1, 0, 0}), 2, 4, {}, q};
  CHECK_NOTHROW(c.validate());
  CHECK(c.indices() == std::vector<int>{2, 0});
  c.values[3] = 1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.values[3] = 0;
  c.active_k = 5;
  CHECK_THROWS_AS(c.validate(), RateOutOfRange);
}

}

TEST_SUITE("ratecontrol") {

TEST_CASE("rate weights form a distribution matching the drop law") {
  const auto w = rate_weights(12, kDefaultDropExponent);
  double s = 0;
  for (double v : w) {
    CHECK(v >= 0);
    s += v;
  }
  CHECK(s == doctest::Approx(1.0));
  // Full rate ⟺ no drop: Pr(D < 1) = (1/12)^β.
  CHECK(w[11] == doctest::Approx(std::pow(1.0 / 12, kDefaultDropExponent)));
}

TEST_CASE("drop depth from the inverse CDF") {
  const RateSchedule s(12, 0.67);
  CHECK(drop_depth(s, 0.0) == 0);
  CHECK(drop_depth(s, 0.999999) == 11);
  CHECK(drop_depth(s, std::pow(0.5, 0.67) + 1e-9) == 6);
  CHECK(s.drop_cdf(0.5) == doctest::Approx(std::pow(0.5, 0.67)));
}

TEST_CASE("tail drop") {
  const Tensor z = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor t = tail_drop(z, 2);
  CHECK(t.storage() == std::vector<float>{1, 2, 0, 4, 5, 0});
  CHECK(tail_drop(z, 3) == z);
  CHECK_THROWS_AS(tail_drop(z, 0), RateOutOfRange);
  CHECK_THROWS_AS(tail_drop(z, 4), RateOutOfRange);
}

}

TEST_SUITE("channel") {

TEST_CASE("noiseless channel is the identity on sent symbols") {
  const Tensor z = Tensor::matrix(1, 4, {0.5f, -0.25f, 1, 1});
  const Tensor out = transmit(z, 2, ChannelConfig::clean(), RngStream(1, 1));
  CHECK(out.storage() == std::vector<float>{0.5f, -0.25f, 0, 0});
  CHECK_THROWS_AS(measure_snr(z, z), ZeroNoise);
}

TEST_CASE("noise realizations are prefix stable") {
  RngStream rng(2, 2);
  const Tensor z = draw_uniform(rng, 24, -1, 1).reshaped({2, 12});
  const ChannelConfig ch = ChannelConfig::awgn(5);
  const Tensor full = transmit(z, 12, ch, RngStream(3, 3), 0.5);
  const Tensor part = transmit(z, 4, ch, RngStream(3, 3), 0.5);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 12; ++c) {
      if (c < 4) {
        CHECK(part.at(r, c) == full.at(r, c));
      } else {
        CHECK(part.at(r, c) == 0.0f);
      }
    }
  }
}

TEST_CASE("noise variance follows the SNR") {
  CHECK(noise_variance(ChannelConfig::awgn(10), 2.0) == doctest::Approx(0.2));
  CHECK(noise_variance(ChannelConfig::awgn(0, PowerMode::kNominal), 7.0) == doctest::Approx(1.0));
  CHECK(noise_variance(ChannelConfig::clean(), 2.0) == 0.0);
  CHECK(parse_channel("noiseless").noiseless());
  CHECK(*parse_channel("7.5").snr_db == 7.5);
  CHECK(to_string(ChannelConfig::clean()) == "noiseless");
  CHECK_THROWS(parse_channel("loud"));
}

}
