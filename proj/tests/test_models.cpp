#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "rsc/checkpoint.hpp"
#include "rsc/models.hpp"

using namespace rsc;

TEST_SUITE("models") {

TEST_CASE("codec and critic shapes") {
  CodecConfig cfg;
  cfg.input_dim = 10;
  cfg.latent_dim = 3;
  cfg.encoder_hidden = {8, 4};
  cfg.decoder_hidden = {5};
  const Codec codec(cfg, RngStream(1, 1));
  RngStream rng(2, 2);
  const Tensor w = draw_uniform(rng, 70, -1, 1).reshaped({7, 10});
  const Tensor y = codec.encode(w);
  CHECK(y.shape() == Shape{7, 3});
  for (float v : y.values()) CHECK(std::abs(v) < 1.0f);
  const Tensor w_hat = codec.decode(y);
  CHECK(w_hat.shape() == Shape{7, 10});
  for (float v : w_hat.values()) CHECK(std::abs(v) < 1.0f);

  const Critic critic(CriticConfig{10, {6}}, RngStream(3, 3));
  CHECK(critic.score(w).shape() == Shape{7, 1});
}

TEST_CASE("every codec parameter receives a gradient") {
  const auto cfg = testing::tiny_config();
  Codec codec(cfg.codec, RngStream(4, 4));
  const Dataset data = testing::tiny_data();
  Graph32 g;
  const Var32 w = g.constant(data.gather({0, 1, 2, 3, 4, 5, 6, 7}));
  const Var32 y = codec.encode(g, w, Mode::kTrain);
  const Var32 loss = distortion_loss(w, codec.decode(g, y, Mode::kTrain));
  codec.params().zero_grad();
  g.backward(loss, &codec.params());
  for (std::size_t i = 0; i < codec.params().size(); ++i) {
    const auto& p = codec.params()[i];
    if (!p.trainable) continue;
    double mag = 0;
    for (float v : p.grad.values()) mag += std::abs(v);
    CAPTURE(p.name);
    CHECK(mag > 0);
  }
}

TEST_CASE("critic clipping bounds every weight") {
  Critic critic(CriticConfig{6, {16}}, RngStream(5, 5));
  CHECK(critic.max_abs_weight() > 0.01f);
  critic.clip(0.01f);
  CHECK(critic.max_abs_weight() <= 0.01f);
}

TEST_CASE("perception loss is the critic gap") {
  const Critic critic(CriticConfig{6, {16}}, RngStream(6, 6));
  const Dataset data = testing::tiny_data();
  const Tensor real = data.gather({0, 1, 2, 3});
  const Tensor fake = data.gather({4, 5, 6, 7});
  Graph32 g;
  const Var32 p = perception_loss(g.constant(real), g.constant(fake),
                                  critic_distance_score(critic, true));
  const auto mean = [](const Tensor& s) {
    double m = 0;
    for (float v : s.values()) m += v;
    return m / s.size();
  };
  CHECK(p.value()[0] ==
        doctest::Approx(mean(critic.score(real)) - mean(critic.score(fake))).epsilon(1e-5));
}

TEST_CASE("sparsity penalty") {
  CHECK(sparsity_penalty(std::vector<double>{0.1, 0.1}, 0.1) == doctest::Approx(0.0));
  const double kl = 0.1 * std::log(0.1 / 0.5) + 0.9 * std::log(0.9 / 0.5);
  CHECK(sparsity_penalty(std::vector<double>{0.5}, 0.1) == doctest::Approx(kl));
  // Clamping keeps saturated units finite.
  CHECK(std::isfinite(sparsity_penalty(std::vector<double>{0.0, 1.0}, 0.1)));
}

}

TEST_SUITE("checkpoint") {

TEST_CASE("round trip preserves every array bit for bit") {
  const auto cfg = testing::tiny_config();
  const TrainState state(cfg);
  const Checkpoint ckpt = state.to_checkpoint(cfg);
  const auto path = testing::scratch_dir("ckpt") / "a.ckpt";
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.config == ckpt.config);
  CHECK(back.seeds == ckpt.seeds);
  REQUIRE(back.arrays.size() == ckpt.arrays.size());
  for (std::size_t i = 0; i < ckpt.arrays.size(); ++i) {
    CHECK(back.arrays[i].first == ckpt.arrays[i].first);
    CHECK(back.arrays[i].second == ckpt.arrays[i].second);
  }
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));

  const LoadedModel m = load_model(path);
  const Tensor w = testing::tiny_data().gather({0, 1, 2});
  CHECK(m.state.codec.decode(m.state.codec.encode(w)) ==
        state.codec.decode(state.codec.encode(w)));
}

TEST_CASE("reader rejects foreign or damaged files") {
  const auto cfg = testing::tiny_config();
  auto bytes = serialize_checkpoint(TrainState(cfg).to_checkpoint(cfg));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), BadMagic);
  bad = bytes;
  bad[8] = 2;
  CHECK_THROWS_AS(deserialize_checkpoint(bad), UnsupportedVersion);
  bad.assign(bytes.begin(), bytes.begin() + bytes.size() / 2);
  CHECK_THROWS_AS(deserialize_checkpoint(bad), TruncatedFile);
  CHECK_THROWS_AS(load_checkpoint(testing::scratch_dir("ckpt") / "absent.ckpt"),
                  MissingCheckpoint);
}

}

TEST_SUITE("models") {

TEST_CASE("per-rate critic heads and their gradient penalty") {
  const Critic critic(CriticConfig{5, {7, 6}, 3}, RngStream(9, 9));
  RngStream rng(1, 2);
  const Tensor x = draw_uniform(rng, 10, -1, 1).reshaped({2, 5});
  const Tensor s0 = critic.score(x, 0), s2 = critic.score(x, 2);
  CHECK(s0.shape() == Shape{2, 1});
  CHECK(s0 != s2);
  CHECK_THROWS_AS(critic.score(x, 3), RateOutOfRange);

  // Penalty against central differences of the selected head.
  const std::size_t head = 1;
  double expect = 0;
  for (std::size_t r = 0; r < 2; ++r) {
    double sq = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      Tensor hi = x, lo = x;
      hi.at(r, c) += 1e-3f;
      lo.at(r, c) -= 1e-3f;
      const double d = (critic.score(hi, head)[r] - critic.score(lo, head)[r]) / 2e-3;
      sq += d * d;
    }
    expect += (std::sqrt(sq) - 1) * (std::sqrt(sq) - 1) / 2;
  }
  Graph32 g;
  CHECK(critic.gradient_penalty(g, x, head).value()[0] == doctest::Approx(expect).epsilon(1e-2));
}

}
