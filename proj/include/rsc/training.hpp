#pragma once

// Joint optimization of the codec against
//
//   L = perception + λ · distortion
//
// where each batch draws one tail-drop rate k from the drop law, so the
// expected loss is the ω_k-weighted sum of per-rate losses. The critic is
// pre-trained with the codec frozen, then alternates n_critic steps per
// codec step.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsc/channel.hpp"
#include "rsc/checkpoint.hpp"
#include "rsc/config.hpp"
#include "rsc/models.hpp"
#include "rsc/numerics/optim.hpp"
#include "rsc/quantizer.hpp"
#include "rsc/ratecontrol.hpp"
#include "rsc/sources.hpp"

namespace rsc {

struct TrainConfig {
  Scheme scheme = Scheme::kRsc;
  CodecConfig codec;
  CriticConfig critic;
  int levels = 16;
  double beta = kDefaultDropExponent;
  ChannelConfig channel = ChannelConfig::awgn(10.0);

  double lambda = 1.0;
  // λ → ∞ limit: the objective is the distortion alone.
  bool distortion_only = false;

  std::size_t epochs = 2;
  std::size_t batch = 64;
  std::uint64_t seed = 0;

  std::size_t n_critic = 5;
  std::size_t critic_warmup = 100;
  double clip = 0.01;
  bool gradient_penalty = false;
  double gp_weight = 10.0;

  OptimizerConfig codec_opt{OptimizerKind::kAdam, 1e-3};
  OptimizerConfig critic_opt{OptimizerKind::kRmsprop, 5e-4};

  double sparsity_target = 0.1;  // SC only
  double sparsity_weight = 1.0;  // SC only

  std::size_t checkpoint_every = 0;  // epochs; 0 = only at the end

  void validate() const;
  bool trains_critic() const { return scheme == Scheme::kRsc && !distortion_only; }
  // Critic head for reconstructions sent at rate k.
  std::size_t critic_head(std::size_t k) const { return critic.heads > 1 ? k - 1 : 0; }
  QuantizerConfig quantizer() const { return QuantizerConfig(levels); }
  RateSchedule schedule() const { return RateSchedule(codec.latent_dim, beta); }

  // Builds from a KvConfig; `input_dim` comes from the dataset.
  static TrainConfig from_kv(const KvConfig& kv, std::size_t input_dim);
  KvConfig to_kv() const;
};

// Everything that evolves during training.
struct TrainState {
  Codec codec;
  Critic critic;
  OptimizerState<float> codec_opt;
  OptimizerState<float> critic_opt;
  std::size_t epochs_done = 0;

  explicit TrainState(const TrainConfig& cfg);

  Checkpoint to_checkpoint(const TrainConfig& cfg) const;
  // Restores parameters, optimizer moments and progress from a checkpoint.
  void restore(const Checkpoint& ckpt);
};

// Rebuilds the trained models of a checkpoint (and its config).
struct LoadedModel {
  TrainConfig config;
  TrainState state;
};
LoadedModel load_model(const std::filesystem::path& path);

struct StepLosses {
  double total = 0;
  double distortion = 0;
  double perception = 0;
  double sparsity = 0;
  std::size_t rate = 0;
};

// Training-path forward: encode (batch statistics) → additive-noise
// quantization proxy → tail drop to k → AWGN → decode. RSC only uses the
// proxy and tail drop; TC/SC send the full continuous latent.
struct CodecForward {
  Var32 latent;      // encoder output y
  Var32 received;    // decoder input
  Var32 w_hat;
  std::size_t rate;
};
CodecForward codec_forward_train(Graph32& g, Var32 w, const Codec& codec,
                                 const TrainConfig& cfg, const RngStream& step_rng,
                                 bool trainable, bool update_stats,
                                 std::optional<std::size_t> fixed_rate = std::nullopt);

// Loss of one forward pass, without any parameter update.
StepLosses codec_losses(Graph32& g, Var32 w, const CodecForward& fwd, const Critic& critic,
                        const TrainConfig& cfg, Var32* total_out = nullptr);

// One codec update; critic parameters are read as constants.
StepLosses train_step_codec(const Tensor& w, TrainState& state, const TrainConfig& cfg,
                            const RngStream& step_rng);

// Reconstructions from the training path with the codec frozen. `rate`
// receives the sampled rate.
Tensor generate_fake(const Tensor& w, const TrainState& state, const TrainConfig& cfg,
                     const RngStream& step_rng, std::size_t* rate = nullptr);

// One critic update ascending E[r(real)] - E[r(fake)] (plus the optional
// gradient penalty), followed by weight clipping unless the penalty is on.
// Returns the score gap measured before the update.
double train_step_critic(const Tensor& real, const Tensor& fake, Critic& critic,
                         OptimizerState<float>& opt, const TrainConfig& cfg,
                         const RngStream& step_rng, std::size_t head = 0);

struct EpochRecord {
  std::size_t epoch = 0;
  double total = 0;
  double distortion = 0;
  double perception = 0;
  double sparsity = 0;
  double critic_gap = 0;
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0;
  std::filesystem::path checkpoint;
  bool early_stopped = false;
};

struct FitOptions {
  std::filesystem::path checkpoint;  // empty: keep in memory only
  std::filesystem::path log;         // JSON lines, one per epoch
  std::optional<std::filesystem::path> resume;
  // Stop after this many epochs of this call (for resume tests).
  std::optional<std::size_t> max_epochs;
  bool verbose = false;
};

TrainReport fit(const TrainConfig& cfg, const Dataset& data, TrainState& state,
                const FitOptions& opts = {});

}  // namespace rsc
