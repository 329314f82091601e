#include "rsc/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>

#include <json.hpp>

#include "rsc/error.hpp"

namespace rsc {

void SessionPolicy::validate() const {
  if (max_delay < 1) throw ConfigError("session max_delay must be >= 1");
  if (chunk < 1) throw ConfigError("session chunk must be >= 1");
  if (rule == AckRule::kFixedK && (fixed_k < 1 || fixed_k > max_delay)) {
    throw RateOutOfRange("fixed_k " + std::to_string(fixed_k) + " outside 1.." +
                         std::to_string(max_delay));
  }
  if (rule == AckRule::kDistortionTarget && !(tau > 0)) {
    throw ConfigError("distortion target tau must be > 0");
  }
}

SessionPolicy SessionPolicy::fixed(std::size_t k, std::size_t K, std::size_t chunk) {
  SessionPolicy p;
  p.max_delay = K;
  p.rule = AckRule::kFixedK;
  p.fixed_k = k;
  p.chunk = chunk;
  return p;
}

SessionPolicy SessionPolicy::target(double tau, AckProxy proxy, std::size_t K,
                                    std::size_t chunk) {
  SessionPolicy p;
  p.max_delay = K;
  p.rule = AckRule::kDistortionTarget;
  p.tau = tau;
  p.proxy = proxy;
  p.chunk = chunk;
  return p;
}

SessionPolicy SessionPolicy::exhaust(std::size_t K, std::size_t chunk) {
  SessionPolicy p;
  p.max_delay = K;
  p.chunk = chunk;
  return p;
}

SessionTrace run_session(const Tensor& w, const SessionModels& models, const QuantizerConfig& q,
                         const ChannelConfig& channel, const SessionPolicy& policy,
                         const CommonRandomness& cr, bool reference) {
  policy.validate();
  if (!models.codec) throw ConfigError("session needs a codec");
  const bool critic_proxy =
      policy.rule == AckRule::kDistortionTarget && policy.proxy == AckProxy::kCritic;
  if (critic_proxy && !models.critic) throw ConfigError("critic proxy without a critic");

  const Tensor source = w.reshaped({1, w.size()});
  const Codec& codec = *models.codec;
  const Tensor y = codec.encode(source);
  const std::size_t K = y.cols();
  if (policy.max_delay != K) {
    throw ConfigError("policy delay " + std::to_string(policy.max_delay) +
                      " differs from latent width " + std::to_string(K));
  }
  Tensor z = y, u({1, K});
  if (models.quantize) {
    QuantizedBlock qb = quantize_block(y, q, cr);
    z = std::move(qb.z);
    u = std::move(qb.dither);
  }

  SessionTrace trace;
  trace.session_id = cr.session_id;
  Tensor received({1, K});
  std::size_t k = 0;
  bool ack = false;
  while (!ack && k < K) {
    const std::size_t next = std::min(k + policy.chunk, K);
    const Tensor got = send_symbols(z, 0, k, next, channel, cr);
    std::memcpy(received.data() + k, got.data(), (next - k) * sizeof(float));
    trace.symbols_sent += next - k;
    k = next;

    const Tensor w_hat =
        codec.decode(models.quantize ? add_dither_back(received, u, k) : received);
    SessionRound round;
    round.k = k;
    round.digest = digest(w_hat);
    if (!channel.noiseless()) {
      Tensor sent({1, k}), heard({1, k});
      std::memcpy(sent.data(), z.data(), k * sizeof(float));
      std::memcpy(heard.data(), received.data(), k * sizeof(float));
      try {
        round.snr_db = measure_snr(sent, heard);
      } catch (const ZeroNoise&) {
      }
    }
    if (reference) round.mse = distortion_loss(source, w_hat);
    if (models.critic) {
      const std::size_t heads = models.critic->config().heads;
      round.critic_score = models.critic->score(w_hat, heads > 1 ? std::min(k, heads) - 1 : 0)[0];
    }

    switch (policy.rule) {
      case AckRule::kFixedK:
        ack = k >= policy.fixed_k;
        break;
      case AckRule::kDistortionTarget:
        round.proxy = policy.proxy == AckProxy::kCritic
                          ? -*round.critic_score
                          : static_cast<double>(distortion_loss(source, w_hat));
        ack = *round.proxy <= policy.tau;
        break;
      case AckRule::kDelayExhausted:
        ack = k == K;
        break;
    }
    round.ack = ack;
    trace.rounds.push_back(round);
    trace.reconstruction = w_hat;
  }
  trace.k_ack = k;
  trace.unsatisfied = policy.rule == AckRule::kDistortionTarget && !ack;
  if (models.quantize) trace.code = make_latent_code(z, k, q, cr);
  return trace;
}

void write_trace_jsonl(const SessionTrace& trace, std::ostream& out) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  for (const auto& r : trace.rounds) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(r.digest));
    nlohmann::json j = {{"session", trace.session_id}, {"k", r.k},
                        {"snr_db", opt(r.snr_db)},     {"digest", hex},
                        {"mse", opt(r.mse)},           {"critic_score", opt(r.critic_score)},
                        {"proxy", opt(r.proxy)},       {"ack", r.ack}};
    out << j.dump() << '\n';
  }
  nlohmann::json s = {{"session", trace.session_id},
                      {"k_ack", trace.k_ack},
                      {"symbols_sent", trace.symbols_sent},
                      {"unsatisfied", trace.unsatisfied}};
  out << s.dump() << '\n';
}

// ---- wire format --------------------------------------------------------------

LatentCode make_latent_code(const Tensor& z_row, std::size_t k, const QuantizerConfig& q,
                            const CommonRandomness& cr, std::uint64_t offset) {
  const std::size_t K = z_row.size();
  if (k < 1 || k > K) throw RateOutOfRange("code rate " + std::to_string(k));
  LatentCode code{Tensor({K}), k, K, DitherRef{cr.seed, cr.session_id, offset}, q};
  for (std::size_t i = 0; i < k; ++i) code.values[i] = q.value(q.index_of(z_row[i]));
  return code;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw TruncatedFile("latent code header");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{in[pos++]} << (8 * i));
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_wire(const LatentCode& code) {
  code.validate();
  std::vector<std::uint8_t> out;
  put_le<std::uint8_t>(out, kWireVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(code.capacity));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(code.active_k));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(code.config.levels()));
  put_le<std::uint64_t>(out, code.dither_ref.seed);
  put_le<std::uint64_t>(out, code.dither_ref.session_id);
  const int bits = code.config.index_bits();
  std::uint32_t acc = 0;
  int filled = 0;
  for (int idx : code.indices()) {
    for (int b = bits - 1; b >= 0; --b) {
      acc = (acc << 1) | ((static_cast<std::uint32_t>(idx) >> b) & 1u);
      if (++filled == 8) {
        out.push_back(static_cast<std::uint8_t>(acc));
        acc = 0;
        filled = 0;
      }
    }
  }
  if (filled) out.push_back(static_cast<std::uint8_t>(acc << (8 - filled)));
  return out;
}

LatentCode decode_wire(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto version = get_le<std::uint8_t>(bytes, pos);
  if (version != kWireVersion) {
    throw UnsupportedVersion("latent code version " + std::to_string(version));
  }
  const std::size_t K = get_le<std::uint32_t>(bytes, pos);
  const std::size_t k = get_le<std::uint32_t>(bytes, pos);
  const int levels = get_le<std::uint16_t>(bytes, pos);
  const auto seed = get_le<std::uint64_t>(bytes, pos);
  const auto session = get_le<std::uint64_t>(bytes, pos);
  if (K == 0 || k < 1 || k > K) throw RateOutOfRange("latent code rate " + std::to_string(k));
  const QuantizerConfig q(levels);
  const int bits = q.index_bits();
  const std::size_t payload = (k * static_cast<std::size_t>(bits) + 7) / 8;
  if (bytes.size() != pos + payload) throw TruncatedFile("latent code payload size");
  LatentCode code{Tensor({K}), k, K, DitherRef{seed, session, 0}, q};
  std::size_t bit = 0;
  for (std::size_t i = 0; i < k; ++i) {
    int idx = 0;
    for (int b = 0; b < bits; ++b, ++bit) {
      idx = (idx << 1) | ((bytes[pos + bit / 8] >> (7 - bit % 8)) & 1);
    }
    if (idx >= levels) throw DomainError("lattice index " + std::to_string(idx));
    code.values[i] = q.value(idx);
  }
  return code;
}

}  // namespace rsc
