#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "rsc/pipeline.hpp"

using namespace rsc;

namespace {

LoadedModel trained(Scheme scheme, std::size_t epochs, std::size_t dim, std::size_t K,
                    const Dataset& data) {
  auto cfg = testing::tiny_config(scheme, dim, K);
  cfg.epochs = epochs;
  cfg.channel = ChannelConfig::clean();
  cfg.codec.encoder_hidden = {32};
  cfg.codec.decoder_hidden = {32};
  LoadedModel m{cfg, TrainState(cfg)};
  fit(m.config, data, m.state);
  return m;
}

SweepConfig small_sweep() {
  SweepConfig s;
  s.rates = {2, 4};
  s.snrs = {ChannelConfig::clean(), ChannelConfig::awgn(5)};
  s.eval.seed = 3;
  s.eval.critic_steps = 20;
  s.eval.critic_batch = 32;
  return s;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("bits per pixel") {
  CHECK(bits_per_pixel(12, 16, 784) == doctest::Approx(0.0612).epsilon(1e-3));
  CHECK(bits_per_pixel(2, 16, 784) == doctest::Approx(8.0 / 784));
  CHECK(bits_per_pixel(3, 3, 1) == doctest::Approx(3 * std::log2(3.0)));
}

TEST_CASE("squared W2 between Gaussians") {
  const Tensor64 zero = Tensor64::vector({0, 0});
  const Tensor64 eye = Tensor64::identity(2);
  CHECK(gaussian_w2(zero, eye, zero, eye) == doctest::Approx(0.0).scale(1));
  CHECK(gaussian_w2(zero, eye, Tensor64::vector({2, 0}), eye) == doctest::Approx(4.0));
  const Tensor64 one = Tensor64::vector({0});
  CHECK(gaussian_w2(one, Tensor64::matrix(1, 1, {1}), one, Tensor64::matrix(1, 1, {4})) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(gaussian_w2(zero, eye, one, Tensor64::matrix(1, 1, {1})), ShapeMismatch);
}

TEST_CASE("fitted W2 is small for samples of the source itself") {
  const auto spec = GaussianSourceSpec::with_spectrum({2, 1, 0.5}, 3);
  const Dataset ds = sample_gaussian_source(spec, 50000, RngStream(8, 8));
  CHECK(gaussian_w2(ds.samples, spec) < 0.01);
}

TEST_CASE("sweep CSV: schema, row order, reproducible bytes, round trip") {
  const Dataset data = testing::tiny_data(6, 128);
  const LoadedModel m = trained(Scheme::kRsc, 2, 6, 4, data);
  const auto points = sweep(small_sweep(), {&m}, data);
  REQUIRE(points.size() == 4);
  CHECK(points[0].rate_k == 2);
  CHECK_FALSE(points[0].snr_db.has_value());
  CHECK(points[1].snr_db == 5.0);
  CHECK(points[3].rate_k == 4);

  const std::string csv = to_csv(points);
  CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(to_csv(sweep(small_sweep(), {&m}, data)) == csv);

  const auto back = parse_csv(csv);
  REQUIRE(back.size() == 4);
  CHECK(to_csv(back) == csv);
  CHECK(to_csv(points, true).find("# proxy-eval") != std::string::npos);
  CHECK(parse_csv(to_csv(points, true)).size() == 4);
  CHECK_THROWS_AS(parse_csv("scheme,rate\n"), ConfigError);

  const auto dir = testing::scratch_dir("plots");
  const auto files = write_plots(points, dir);
  CHECK(files.size() == 3);
  for (const auto& f : files) {
    CHECK(std::filesystem::file_size(f) > 100);
    CHECK(read_text(f).find("<svg") != std::string::npos);
  }
}

TEST_CASE("an over-parameterized codec learns the identity") {
  // K = d with a clean channel: the continuous baseline should reconstruct
  // almost exactly after enough epochs.
  const Dataset data = testing::tiny_data(4, 256);
  auto cfg = testing::tiny_config(Scheme::kTc, 4, 4);
  cfg.epochs = 800;
  cfg.batch = 32;
  cfg.channel = ChannelConfig::clean();
  cfg.codec.encoder_hidden = {32};
  cfg.codec.decoder_hidden = {32};
  cfg.codec.bounded_output = false;
  LoadedModel m{cfg, TrainState(cfg)};
  fit(m.config, data, m.state);
  const Tensor w_hat = reconstruct_dataset(m, data, 4, ChannelConfig::clean(), 1);
  CHECK(distortion_loss(data.samples, w_hat) < 1e-2);
}

TEST_CASE("more symbols never hurt on a trained codec") {
  const Dataset data = testing::tiny_data(6, 256);
  auto cfg = testing::tiny_config(Scheme::kRsc, 6, 4);
  cfg.distortion_only = true;
  cfg.channel = ChannelConfig::clean();
  cfg.epochs = 40;
  LoadedModel m{cfg, TrainState(cfg)};
  fit(m.config, data, m.state);
  const float full =
      distortion_loss(data.samples, reconstruct_dataset(m, data, 4, ChannelConfig::clean(), 1));
  const float one =
      distortion_loss(data.samples, reconstruct_dataset(m, data, 1, ChannelConfig::clean(), 1));
  CHECK(full <= one);
}

}
