#include "rsc/training.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace rsc {
namespace {

// Stream tags. Each training step derives its own child streams, so the
// randomness of a step depends only on (seed, epoch, step).
constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kEpochTag = 0xE90C;
constexpr std::uint64_t kShuffleTag = 1;
constexpr std::uint64_t kWarmupTag = 2;
constexpr std::uint64_t kStepBase = 1000;
constexpr std::uint64_t kProxyTag = 11;
constexpr std::uint64_t kRateTag = 12;
constexpr std::uint64_t kNoiseTag = 13;
constexpr std::uint64_t kPenaltyTag = 14;
constexpr std::uint64_t kCodecTag = 21;
constexpr std::uint64_t kCriticBase = 30;

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void read_betas(const KvConfig& kv, const std::string& key, OptimizerConfig& opt) {
  const auto parts = split(kv.get(key), ',');
  if (parts.size() != 2) throw ConfigError(key + " needs two values");
  opt.beta1 = std::stod(parts[0]);
  opt.beta2 = std::stod(parts[1]);
  if (!(opt.beta1 >= 0 && opt.beta1 < 1 && opt.beta2 >= 0 && opt.beta2 < 1)) {
    throw ConfigError(key + " must lie in [0,1)");
  }
}

void store_moments(Checkpoint& ckpt, const std::string& prefix, const OptimizerState<float>& s) {
  for (const auto& [name, t] : s.first) ckpt.arrays.emplace_back(prefix + ".m/" + name, t);
  for (const auto& [name, t] : s.second) ckpt.arrays.emplace_back(prefix + ".v/" + name, t);
}

void load_moments(const Checkpoint& ckpt, const std::string& prefix, OptimizerState<float>& s) {
  s.first.clear();
  s.second.clear();
  const std::string m = prefix + ".m/", v = prefix + ".v/";
  for (const auto& [name, t] : ckpt.arrays) {
    if (name.rfind(m, 0) == 0) s.first[name.substr(m.size())] = t;
    if (name.rfind(v, 0) == 0) s.second[name.substr(v.size())] = t;
  }
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

// ---- configuration ----------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lambda >= 0)) throw ConfigError("train.lambda must be >= 0");
  if (n_critic < 1) throw ConfigError("critic.n_critic must be >= 1");
  if (batch < 2) throw ConfigError("train.batch must be >= 2 (batch normalization)");
  if (codec.latent_dim < 1) throw ConfigError("model.K must be >= 1");
  if (levels < 2) throw ConfigError("model.Lq must be >= 2");
  if (!(beta > 0)) throw ConfigError("rate.beta must be > 0");
  if (critic.input_dim != codec.input_dim) throw ConfigError("critic/codec input widths differ");
  if (critic.heads != 1 && critic.heads != codec.latent_dim) {
    throw ConfigError("critic needs one head or one per rate");
  }
  if (!(clip > 0)) throw ConfigError("critic.clip must be > 0");
  if (!(sparsity_target > 0 && sparsity_target < 1)) throw ConfigError("sc.rho must lie in (0,1)");
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, std::size_t input_dim) {
  TrainConfig c;
  c.scheme = parse_scheme(kv.get("model.scheme"));
  c.codec.input_dim = input_dim;
  c.codec.latent_dim = static_cast<std::size_t>(kv.get_int("model.K"));
  c.codec.encoder_hidden = kv.get_sizes("model.encoder_hidden");
  c.codec.decoder_hidden = kv.get_sizes("model.decoder_hidden");
  const std::string output = kv.get("model.output");
  if (output == "auto") {
    c.codec.bounded_output = parse_source_kind(kv.get("data.kind")) == SourceKind::kMnist;
  } else if (output == "tanh" || output == "linear") {
    c.codec.bounded_output = output == "tanh";
  } else {
    throw ConfigError("model.output must be auto|tanh|linear");
  }
  c.codec.decoder_batch_norm = kv.get_bool("model.decoder_batch_norm");
  c.critic.input_dim = input_dim;
  c.critic.hidden = kv.get_sizes("critic.hidden");
  c.critic.heads = kv.get_bool("critic.per_rate") ? c.codec.latent_dim : 1;
  c.levels = static_cast<int>(kv.get_int("model.Lq"));
  c.beta = kv.get_double("rate.beta");
  c.channel = parse_channel(kv.get("channel.snr_db"));
  const std::string power = kv.get("channel.power");
  if (power == "nominal") {
    c.channel.power_mode = PowerMode::kNominal;
  } else if (power != "empirical") {
    throw ConfigError("channel.power must be empirical|nominal");
  }
  c.lambda = kv.get_double("train.lambda");
  c.distortion_only = kv.get_bool("train.distortion_only");
  c.epochs = static_cast<std::size_t>(kv.get_int("train.epochs"));
  c.batch = static_cast<std::size_t>(kv.get_int("train.batch"));
  c.seed = kv.get("train.seed").empty() ? 0 : kv.get_u64("train.seed");
  c.codec_opt.kind = parse_optimizer_kind(kv.get("train.optimizer"));
  c.codec_opt.lr = kv.get_double("train.lr");
  read_betas(kv, "train.adam_betas", c.codec_opt);
  c.checkpoint_every = static_cast<std::size_t>(kv.get_int("train.checkpoint_every"));
  c.clip = kv.get_double("critic.clip");
  c.n_critic = static_cast<std::size_t>(kv.get_int("critic.n_critic"));
  c.critic_warmup = static_cast<std::size_t>(kv.get_int("critic.warmup"));
  c.critic_opt.kind = parse_optimizer_kind(kv.get("critic.optimizer"));
  c.critic_opt.lr = kv.get_double("critic.lr");
  read_betas(kv, "critic.adam_betas", c.critic_opt);
  c.gradient_penalty = kv.get_bool("critic.gp");
  c.gp_weight = kv.get_double("critic.gp_weight");
  c.sparsity_target = kv.get_double("sc.rho");
  c.sparsity_weight = kv.get_double("sc.weight");
  c.validate();
  return c;
}

KvConfig TrainConfig::to_kv() const {
  KvConfig kv;
  kv.set("model.scheme", to_string(scheme));
  kv.set("model.K", std::to_string(codec.latent_dim));
  kv.set("model.Lq", std::to_string(levels));
  kv.set("model.encoder_hidden", join_sizes(codec.encoder_hidden));
  kv.set("model.decoder_hidden", join_sizes(codec.decoder_hidden));
  kv.set("model.output", codec.bounded_output ? "tanh" : "linear");
  kv.set("model.decoder_batch_norm", codec.decoder_batch_norm ? "true" : "false");
  kv.set("critic.hidden", join_sizes(critic.hidden));
  kv.set("critic.per_rate", critic.heads > 1 ? "true" : "false");
  kv.set("rate.beta", fmt_double(beta));
  kv.set("channel.snr_db", channel.noiseless() ? "noiseless" : fmt_double(*channel.snr_db));
  kv.set("channel.power", channel.power_mode == PowerMode::kNominal ? "nominal" : "empirical");
  kv.set("train.lambda", fmt_double(lambda));
  kv.set("train.distortion_only", distortion_only ? "true" : "false");
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch", std::to_string(batch));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.optimizer", to_string(codec_opt.kind));
  kv.set("train.lr", fmt_double(codec_opt.lr));
  kv.set("train.adam_betas", fmt_double(codec_opt.beta1) + "," + fmt_double(codec_opt.beta2));
  kv.set("train.checkpoint_every", std::to_string(checkpoint_every));
  kv.set("critic.clip", fmt_double(clip));
  kv.set("critic.n_critic", std::to_string(n_critic));
  kv.set("critic.warmup", std::to_string(critic_warmup));
  kv.set("critic.optimizer", to_string(critic_opt.kind));
  kv.set("critic.lr", fmt_double(critic_opt.lr));
  kv.set("critic.adam_betas", fmt_double(critic_opt.beta1) + "," + fmt_double(critic_opt.beta2));
  kv.set("critic.gp", gradient_penalty ? "true" : "false");
  kv.set("critic.gp_weight", fmt_double(gp_weight));
  kv.set("sc.rho", fmt_double(sparsity_target));
  kv.set("sc.weight", fmt_double(sparsity_weight));
  return kv;
}

// ---- state ------------------------------------------------------------------

TrainState::TrainState(const TrainConfig& cfg)
    : codec(cfg.codec, RngStream(cfg.seed, kInitTag)),
      critic(cfg.critic, RngStream(cfg.seed, kInitTag).derive(99)) {}

Checkpoint TrainState::to_checkpoint(const TrainConfig& cfg) const {
  Checkpoint ckpt;
  ckpt.config = cfg.to_kv().effective();
  ckpt.config["model.input_dim"] = std::to_string(cfg.codec.input_dim);
  ckpt.config["state.epochs_done"] = std::to_string(epochs_done);
  ckpt.config["state.codec_steps"] = std::to_string(codec_opt.steps);
  ckpt.config["state.critic_steps"] = std::to_string(critic_opt.steps);
  ckpt.seeds["train.seed"] = cfg.seed;
  ckpt.add_params("codec/", codec.params());
  ckpt.add_params("critic/", critic.params());
  store_moments(ckpt, "opt.codec", codec_opt);
  store_moments(ckpt, "opt.critic", critic_opt);
  return ckpt;
}

void TrainState::restore(const Checkpoint& ckpt) {
  ckpt.load_params("codec/", codec.params());
  ckpt.load_params("critic/", critic.params());
  load_moments(ckpt, "opt.codec", codec_opt);
  load_moments(ckpt, "opt.critic", critic_opt);
  auto num = [&](const char* key) -> std::uint64_t {
    auto it = ckpt.config.find(key);
    return it == ckpt.config.end() ? 0 : std::stoull(it->second);
  };
  epochs_done = num("state.epochs_done");
  codec_opt.steps = static_cast<std::int64_t>(num("state.codec_steps"));
  critic_opt.steps = static_cast<std::int64_t>(num("state.critic_steps"));
}

LoadedModel load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  KvConfig kv;
  for (const auto& [k, v] : ckpt.config) {
    if (KvConfig::known_keys().count(k)) kv.set(k, v);
  }
  auto it = ckpt.config.find("model.input_dim");
  if (it == ckpt.config.end()) throw ConfigError(path.string() + ": no model.input_dim");
  TrainConfig cfg = TrainConfig::from_kv(kv, std::stoul(it->second));
  LoadedModel m{cfg, TrainState(cfg)};
  m.state.restore(ckpt);
  return m;
}

// ---- steps ------------------------------------------------------------------

CodecForward codec_forward_train(Graph32& g, Var32 w, const Codec& codec,
                                 const TrainConfig& cfg, const RngStream& step_rng,
                                 bool trainable, bool update_stats,
                                 std::optional<std::size_t> fixed_rate) {
  const std::size_t K = cfg.codec.latent_dim;
  Var32 y = trainable ? codec.encode(g, w, Mode::kTrain, update_stats)
                      : codec.encoder().forward_frozen(g, w, Mode::kTrain);
  Var32 sent = y;
  std::size_t k = K;
  if (cfg.scheme == Scheme::kRsc) {
    RngStream proxy_rng = step_rng.derive(kProxyTag);
    sent = training_proxy(y, proxy_rng, cfg.quantizer().step());
    RngStream rate_rng = step_rng.derive(kRateTag);
    k = fixed_rate ? *fixed_rate : sample_rate(cfg.schedule(), rate_rng);
  } else if (fixed_rate) {
    k = *fixed_rate;
  }
  if (k < 1 || k > K) throw RateOutOfRange("training rate " + std::to_string(k));
  Var32 z = k < K ? ad::mask_tail(sent, k) : sent;
  if (!cfg.channel.noiseless()) {
    const double sigma =
        std::sqrt(noise_variance(cfg.channel, signal_power(sent.value(), K)));
    z = ad::add(z, g.constant(channel_noise(z.shape(), k, sigma, step_rng.derive(kNoiseTag))));
  }
  Var32 w_hat = trainable ? codec.decode(g, z, Mode::kTrain, update_stats)
                          : codec.decoder().forward_frozen(g, z, Mode::kTrain);
  return {y, z, w_hat, k};
}

StepLosses codec_losses(Graph32& g, Var32 w, const CodecForward& fwd, const Critic& critic,
                        const TrainConfig& cfg, Var32* total_out) {
  StepLosses out;
  out.rate = fwd.rate;
  Var32 distortion = distortion_loss(w, fwd.w_hat);
  out.distortion = distortion.value()[0];
  Var32 total = distortion;
  switch (cfg.scheme) {
    case Scheme::kRsc: {
      Var32 perception = perception_loss(
          w, fwd.w_hat, critic_distance_score(critic, true, cfg.critic_head(fwd.rate)));
      out.perception = perception.value()[0];
      if (!cfg.distortion_only) {
        total = ad::add(perception, ad::scale(distortion, static_cast<float>(cfg.lambda)));
      }
      break;
    }
    case Scheme::kTc:
      break;
    case Scheme::kSc: {
      // Mean activation of each latent unit, mapped from tanh's (-1,1) to
      // (0,1): (1 + y)/2 = sigmoid(2a) for pre-activation a.
      Var32 act = ad::scale(ad::add(fwd.latent, g.constant(Tensor::scalar(1.0f))), 0.5f);
      Var32 kl = sparsity_penalty(ad::column_mean(act), cfg.sparsity_target);
      out.sparsity = kl.value()[0];
      total = ad::add(distortion, ad::scale(kl, static_cast<float>(cfg.sparsity_weight)));
      break;
    }
  }
  out.total = total.value()[0];
  if (total_out) *total_out = total;
  return out;
}

StepLosses train_step_codec(const Tensor& w, TrainState& state, const TrainConfig& cfg,
                            const RngStream& step_rng) {
  Graph32 g;
  Var32 wv = g.constant(w);
  CodecForward fwd = codec_forward_train(g, wv, state.codec, cfg, step_rng, true, true);
  Var32 total;
  StepLosses losses = codec_losses(g, wv, fwd, state.critic, cfg, &total);
  g.backward(total, &state.codec.params());
  optimizer_step(state.codec.params(), state.codec_opt, cfg.codec_opt);
  return losses;
}

Tensor generate_fake(const Tensor& w, const TrainState& state, const TrainConfig& cfg,
                     const RngStream& step_rng, std::size_t* rate) {
  Graph32 g;
  const CodecForward fwd =
      codec_forward_train(g, g.constant(w), state.codec, cfg, step_rng, false, false);
  if (rate) *rate = fwd.rate;
  return fwd.w_hat.value();
}

double train_step_critic(const Tensor& real, const Tensor& fake, Critic& critic,
                         OptimizerState<float>& opt, const TrainConfig& cfg,
                         const RngStream& step_rng, std::size_t head) {
  Graph32 g;
  Var32 gap = ad::sub(ad::mean(critic.score(g, g.constant(real), head)),
                      ad::mean(critic.score(g, g.constant(fake), head)));
  Var32 loss = ad::neg(gap);
  if (cfg.gradient_penalty) {
    RngStream mix = step_rng.derive(kPenaltyTag);
    const std::size_t b = std::min(real.rows(), fake.rows()), d = real.cols();
    Tensor interp({b, d});
    for (std::size_t i = 0; i < b; ++i) {
      const float t = static_cast<float>(mix.next_uniform());
      for (std::size_t j = 0; j < d; ++j) {
        interp[i * d + j] = t * real[i * d + j] + (1 - t) * fake[i * d + j];
      }
    }
    loss = ad::add(loss, ad::scale(critic.gradient_penalty(g, interp, head),
                                   static_cast<float>(cfg.gp_weight)));
  }
  g.backward(loss, &critic.params());
  optimizer_step(critic.params(), opt, cfg.critic_opt);
  if (!cfg.gradient_penalty) critic.clip(static_cast<float>(cfg.clip));
  return gap.value()[0];
}

// ---- fit --------------------------------------------------------------------

TrainReport fit(const TrainConfig& cfg, const Dataset& data, TrainState& state,
                const FitOptions& opts) {
  cfg.validate();
  if (data.dim() != cfg.codec.input_dim) {
    throw ShapeMismatch("dataset width " + std::to_string(data.dim()) + " vs model input " +
                        std::to_string(cfg.codec.input_dim));
  }
  const std::size_t batch = std::min(cfg.batch, data.size());
  if (opts.resume) state.restore(load_checkpoint(*opts.resume));

  std::ofstream log;
  if (!opts.log.empty()) {
    if (opts.log.has_parent_path()) std::filesystem::create_directories(opts.log.parent_path());
    log.open(opts.log, std::ios::app);
    if (!log) throw IoError("cannot open training log " + opts.log.string());
  }
  auto save = [&](const std::filesystem::path& path) {
    save_checkpoint(state.to_checkpoint(cfg), path);
  };

  TrainReport report;
  report.checkpoint = opts.checkpoint;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t run_epochs = 0;
  while (state.epochs_done < cfg.epochs) {
    if (opts.max_epochs && run_epochs >= *opts.max_epochs) {
      report.early_stopped = true;
      break;
    }
    const std::size_t epoch = state.epochs_done;
    const auto te = std::chrono::steady_clock::now();
    const RngStream erng = RngStream(cfg.seed, kEpochTag).derive(epoch);

    if (epoch == 0 && cfg.trains_critic()) {
      // Critic pre-training against the initial codec.
      RngStream pick = erng.derive(kWarmupTag);
      for (std::size_t s = 0; s < cfg.critic_warmup; ++s) {
        std::vector<std::size_t> idx(batch);
        for (auto& i : idx) i = pick.next_below(data.size());
        const Tensor real = data.gather(idx);
        const RngStream srng = pick.derive(s);
        std::size_t k = 0;
        const Tensor fake = generate_fake(real, state, cfg, srng, &k);
        train_step_critic(real, fake, state.critic, state.critic_opt, cfg, srng.derive(1),
                          cfg.critic_head(k));
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    double weight = 0;
    BatchIterator it(data, batch, erng.derive(kShuffleTag), true);
    std::size_t step = 0;
    while (auto w = it.next()) {
      const RngStream srng = erng.derive(kStepBase + step++);
      if (w->rows() < 2) continue;
      double gap = 0;
      if (cfg.trains_critic()) {
        for (std::size_t c = 0; c < cfg.n_critic; ++c) {
          const RngStream crng = srng.derive(kCriticBase + c);
          std::size_t k = 0;
          const Tensor fake = generate_fake(*w, state, cfg, crng, &k);
          gap = train_step_critic(*w, fake, state.critic, state.critic_opt, cfg, crng,
                                  cfg.critic_head(k));
        }
      }
      const StepLosses l = train_step_codec(*w, state, cfg, srng.derive(kCodecTag));
      const double b = static_cast<double>(w->rows());
      rec.total += b * l.total;
      rec.distortion += b * l.distortion;
      rec.perception += b * l.perception;
      rec.sparsity += b * l.sparsity;
      rec.critic_gap += b * gap;
      weight += b;
    }
    rec.total /= weight;
    rec.distortion /= weight;
    rec.perception /= weight;
    rec.sparsity /= weight;
    rec.critic_gap /= weight;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - te).count();
    report.epochs.push_back(rec);
    ++state.epochs_done;
    ++run_epochs;

    if (log) {
      nlohmann::json j = {{"epoch", rec.epoch},          {"total", rec.total},
                          {"distortion", rec.distortion}, {"perception", rec.perception},
                          {"sparsity", rec.sparsity},     {"critic_gap", rec.critic_gap},
                          {"seconds", rec.seconds},       {"timestamp", iso_now()}};
      log << j.dump() << '\n';
      log.flush();
    }
    if (opts.verbose) {
      std::cerr << "epoch " << rec.epoch << " total " << rec.total << " distortion "
                << rec.distortion << " perception " << rec.perception << " ("
                << rec.seconds << " s)\n";
    }
    if (!opts.checkpoint.empty() && cfg.checkpoint_every > 0 &&
        state.epochs_done % cfg.checkpoint_every == 0 && state.epochs_done < cfg.epochs) {
      save(opts.checkpoint);
    }
  }
  if (!opts.checkpoint.empty()) save(opts.checkpoint);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace rsc
