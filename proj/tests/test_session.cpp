#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "rsc/session.hpp"

using namespace rsc;

namespace {

struct Rig {
  TrainConfig cfg = testing::tiny_config();
  TrainState state{cfg};
  Tensor w = testing::tiny_data().gather({3});
  SessionModels models() const { return {&state.codec, &state.critic, true}; }
};

}  // namespace

TEST_SUITE("session") {

TEST_CASE("fixed_k(K) streams every symbol, one round each") {
  Rig rig;
  const std::size_t K = rig.cfg.codec.latent_dim;
  const auto t = run_session(rig.w, rig.models(), rig.cfg.quantizer(), ChannelConfig::awgn(5),
                             SessionPolicy::fixed(K, K), CommonRandomness{1, 2});
  CHECK(t.rounds.size() == K);
  CHECK(t.k_ack == K);
  CHECK(t.symbols_sent == K);
  CHECK(t.rounds.back().ack);
  for (std::size_t i = 0; i + 1 < K; ++i) CHECK_FALSE(t.rounds[i].ack);
}

TEST_CASE("an unbounded target is met after the first round") {
  Rig rig;
  const std::size_t K = rig.cfg.codec.latent_dim;
  const auto t = run_session(rig.w, rig.models(), rig.cfg.quantizer(), ChannelConfig::clean(),
                             SessionPolicy::target(INFINITY, AckProxy::kOracleMse, K),
                             CommonRandomness{1, 3});
  CHECK(t.k_ack == 1);
  CHECK(t.rounds.size() == 1);
  CHECK_FALSE(t.unsatisfied);
}

TEST_CASE("an unreachable target runs to K and is flagged") {
  Rig rig;
  const std::size_t K = rig.cfg.codec.latent_dim;
  const auto t = run_session(rig.w, rig.models(), rig.cfg.quantizer(), ChannelConfig::awgn(0),
                             SessionPolicy::target(1e-12, AckProxy::kOracleMse, K, 3),
                             CommonRandomness{1, 4});
  CHECK(t.unsatisfied);
  CHECK(t.k_ack == K);
  // Chunks of 3 over K = 4 symbols: rounds at k = 3 and 4.
  REQUIRE(t.rounds.size() == 2);
  CHECK(t.rounds[0].k == 3);
  CHECK(t.rounds[1].k == 4);
}

TEST_CASE("session reconstruction equals the one-shot path") {
  Rig rig;
  const CommonRandomness cr{7, 8};
  const ChannelConfig ch = ChannelConfig::awgn(5);
  const std::size_t K = rig.cfg.codec.latent_dim;
  for (std::size_t k = 1; k <= K; ++k) {
    const auto t = run_session(rig.w, rig.models(), rig.cfg.quantizer(), ch,
                               SessionPolicy::fixed(k, K), cr);
    CHECK(t.reconstruction ==
          reconstruct(rig.state.codec, rig.w, k, rig.cfg.quantizer(), ch, cr));
  }
}

TEST_CASE("trace is JSON lines") {
  Rig rig;
  const auto t = run_session(rig.w, rig.models(), rig.cfg.quantizer(), ChannelConfig::clean(),
                             SessionPolicy::exhaust(4), CommonRandomness{1, 1});
  std::ostringstream os;
  write_trace_jsonl(t, os);
  std::istringstream in(os.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    CHECK(line.front() == '{');
    CHECK(line.back() == '}');
    ++n;
  }
  CHECK(n == t.rounds.size() + 1);
}

TEST_CASE("wire format round trip") {
  const QuantizerConfig q(16);
  RngStream rng(3, 3);
  const Tensor y = draw_uniform(rng, 12, -1, 1).reshaped({1, 12});
  const CommonRandomness cr{0x0123456789abcdefULL, 42};
  for (std::size_t k : {1, 5, 12}) {
    const LatentCode code = make_latent_code(y, k, q, cr);
    const auto bytes = encode_wire(code);
    // 1 + 4 + 4 + 2 + 8 + 8 header bytes, then 4 bits per index.
    CHECK(bytes.size() == 27 + (4 * k + 7) / 8);
    const LatentCode back = decode_wire(bytes);
    CHECK(back.active_k == k);
    CHECK(back.indices() == code.indices());
    CHECK(back.values == code.values);
  }
}

TEST_CASE("wire format errors") {
  const QuantizerConfig q(3);
  const Tensor y = Tensor::matrix(1, 4, {0.9f, -0.9f, 0.1f, 0.4f});
  auto bytes = encode_wire(make_latent_code(y, 4, q, CommonRandomness{1, 1}));
  auto bad = bytes;
  bad[0] = 9;
  CHECK_THROWS_AS(decode_wire(bad), UnsupportedVersion);
  bad.assign(bytes.begin(), bytes.begin() + 10);
  CHECK_THROWS_AS(decode_wire(bad), TruncatedFile);
  bad = bytes;
  bad.back() = 0xFF;  // index 3 with L = 3
  CHECK_THROWS_AS(decode_wire(bad), DomainError);
}

TEST_CASE("policy validation") {
  CHECK_THROWS_AS(SessionPolicy::fixed(0, 4).validate(), RateOutOfRange);
  CHECK_THROWS_AS(SessionPolicy::fixed(5, 4).validate(), RateOutOfRange);
  CHECK_THROWS_AS(SessionPolicy::exhaust(4, 0).validate(), ConfigError);
}

}
