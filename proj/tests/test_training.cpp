#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "rsc/training.hpp"

using namespace rsc;

namespace {

std::vector<std::uint8_t> snapshot(const TrainState& s, const TrainConfig& cfg) {
  return serialize_checkpoint(s.to_checkpoint(cfg));
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("config validation") {
  auto cfg = testing::tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.batch = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = testing::tiny_config();
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = testing::tiny_config();
  cfg.n_critic = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config round trips through key = value form") {
  auto cfg = testing::tiny_config(Scheme::kSc);
  cfg.lambda = 0.25;
  cfg.gradient_penalty = true;
  const TrainConfig back = TrainConfig::from_kv(cfg.to_kv(), cfg.codec.input_dim);
  CHECK(back.scheme == Scheme::kSc);
  CHECK(back.lambda == 0.25);
  CHECK(back.gradient_penalty);
  CHECK(back.codec.encoder_hidden == cfg.codec.encoder_hidden);
  CHECK(back.codec.latent_dim == cfg.codec.latent_dim);
}

TEST_CASE("environment overrides the file") {
  KvConfig kv = KvConfig::parse("train.lambda = 2\n");
  ::setenv("RSC_TRAIN_LAMBDA", "0.3", 1);
  kv.apply_env();
  ::unsetenv("RSC_TRAIN_LAMBDA");
  CHECK(kv.get_double("train.lambda") == 0.3);
  CHECK(KvConfig::env_name("critic.n_critic") == "RSC_CRITIC_N_CRITIC");
  CHECK_THROWS_AS(KvConfig::parse("no.such.key = 1\n"), ConfigError);
}

TEST_CASE("same seed, same weights") {
  const auto cfg = testing::tiny_config();
  const Dataset data = testing::tiny_data();
  TrainState a(cfg), b(cfg);
  fit(cfg, data, a);
  fit(cfg, data, b);
  CHECK(snapshot(a, cfg) == snapshot(b, cfg));
  auto other = cfg;
  other.seed = 12;
  TrainState c(other);
  fit(other, data, c);
  CHECK(c.codec.encode(data.samples) != a.codec.encode(data.samples));
}

TEST_CASE("resume continues exactly") {
  auto cfg = testing::tiny_config();
  cfg.epochs = 3;
  const Dataset data = testing::tiny_data();
  TrainState whole(cfg);
  fit(cfg, data, whole);

  const auto dir = testing::scratch_dir("resume");
  FitOptions first;
  first.checkpoint = dir / "part.ckpt";
  first.max_epochs = 1;
  TrainState part(cfg);
  fit(cfg, data, part, first);

  FitOptions second;
  second.checkpoint = dir / "rest.ckpt";
  second.resume = dir / "part.ckpt";
  TrainState rest(cfg);
  fit(cfg, data, rest, second);
  CHECK(rest.epochs_done == 3);
  CHECK(snapshot(rest, cfg) == snapshot(whole, cfg));
}

TEST_CASE("training log has one line per epoch") {
  const auto cfg = testing::tiny_config(Scheme::kTc);
  const auto dir = testing::scratch_dir("log");
  FitOptions opts;
  opts.log = dir / "sub" / "train.jsonl";
  std::filesystem::remove(opts.log);
  TrainState s(cfg);
  const TrainReport r = fit(cfg, testing::tiny_data(), s, opts);
  CHECK(r.epochs.size() == 2);
  std::ifstream in(opts.log);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    CHECK(line.front() == '{');
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("codec step lowers the distortion on a fixed batch") {
  auto cfg = testing::tiny_config(Scheme::kTc);
  cfg.channel = ChannelConfig::clean();
  TrainState s(cfg);
  const Tensor w = testing::tiny_data().gather({0, 1, 2, 3, 4, 5, 6, 7});
  const RngStream rng(1, 1);
  const double first = train_step_codec(w, s, cfg, rng).distortion;
  double last = first;
  for (int i = 0; i < 50; ++i) last = train_step_codec(w, s, cfg, rng).distortion;
  CHECK(last < first);
}

}
