#pragma once

// Codec networks (encoder f_φ, decoder g_θ), the Wasserstein critic r_ζ and
// the losses built on them. All networks are batch-major MLPs over [B × d].

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsc/numerics/graph.hpp"
#include "rsc/numerics/rng.hpp"

namespace rsc {

using Var32 = Var<float>;
using Graph32 = Graph<float>;
using Params = ParameterSet<float>;

enum class Mode { kTrain, kEval };

enum class Scheme { kRsc, kTc, kSc };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& name);

inline constexpr float kLeakySlope = 0.01f;
inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.1f;

// Dense → BatchNorm → LeakyReLU for every hidden width, then a dense output
// layer and an optional tanh. Parameter names: <prefix>.l<i>.{w,b},
// <prefix>.bn<i>.{gamma,beta,mean,var}.
class Mlp {
 public:
  Mlp() = default;
  Mlp(Params& params, std::string prefix, std::vector<std::size_t> widths,
      bool batch_norm, bool tanh_out, RngStream init);

  // In kTrain mode batch statistics normalize the batch; when
  // `update_stats` is set they also feed the running averages.
  Var32 forward(Graph32& g, Var32 x, Mode mode, bool update_stats = false) const;

  // Forward with every parameter entered as a graph constant.
  Var32 forward_frozen(Graph32& g, Var32 x, Mode mode) const;

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  std::size_t layers() const { return weights_.size(); }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }

  Parameter<float>& weight(std::size_t i) const { return *weights_.at(i); }
  Parameter<float>& bias(std::size_t i) const { return *biases_.at(i); }

 private:
  Var32 run(Graph32& g, Var32 x, Mode mode, bool update_stats, bool frozen) const;

  struct Norm {
    Parameter<float>* gamma;
    Parameter<float>* beta;
    Parameter<float>* mean;
    Parameter<float>* var;
  };
  std::vector<std::size_t> widths_;
  std::vector<Parameter<float>*> weights_;
  std::vector<Parameter<float>*> biases_;
  std::vector<Norm> norms_;
  bool tanh_out_ = false;
};

struct CodecConfig {
  std::size_t input_dim = 784;
  std::size_t latent_dim = 12;  // K
  std::vector<std::size_t> encoder_hidden{512, 256, 128, 64};
  std::vector<std::size_t> decoder_hidden{128, 256, 512};
  // tanh on the decoder output; off for unbounded sources.
  bool bounded_output = true;
  // Batch norm in the decoder. Its running statistics average over every
  // training rate, which can bias eval-mode outputs at the extremes.
  bool decoder_batch_norm = true;
};

// Encoder: d → hidden… → K with tanh, so y ∈ (-1, 1)^K.
// Decoder: K → hidden… → d, with tanh (ŵ ∈ (-1, 1)^d) when bounded_output.
class Codec {
 public:
  Codec(const CodecConfig& cfg, RngStream init);
  Codec(const Codec&) = delete;
  Codec& operator=(const Codec&) = delete;
  Codec(Codec&&) = default;

  Var32 encode(Graph32& g, Var32 w, Mode mode, bool update_stats = false) const;
  Var32 decode(Graph32& g, Var32 y, Mode mode, bool update_stats = false) const;

  // Inference-mode convenience wrappers.
  Tensor encode(const Tensor& w) const;
  Tensor decode(const Tensor& y) const;

  const CodecConfig& config() const noexcept { return cfg_; }
  Params& params() noexcept { return params_; }
  const Params& params() const noexcept { return params_; }
  const Mlp& encoder() const noexcept { return encoder_; }
  const Mlp& decoder() const noexcept { return decoder_; }

 private:
  CodecConfig cfg_;
  Params params_;
  Mlp encoder_;
  Mlp decoder_;
};

struct CriticConfig {
  std::size_t input_dim = 784;
  std::vector<std::size_t> hidden{256, 64};
  // Output heads sharing the hidden layers. With one head per rate, head
  // k-1 scores reconstructions sent at rate k.
  std::size_t heads = 1;
};

// r_ζ: d → hidden… → 1, LeakyReLU, linear output, no normalization layers.
// Trained to score real samples above reconstructions.
class Critic {
 public:
  Critic(const CriticConfig& cfg, RngStream init);
  Critic(const Critic&) = delete;
  Critic& operator=(const Critic&) = delete;
  Critic(Critic&&) = default;

  Var32 score(Graph32& g, Var32 x, std::size_t head = 0) const;         // [B × 1], trainable
  Var32 score_frozen(Graph32& g, Var32 x, std::size_t head = 0) const;  // [B × 1], constants
  Tensor score(const Tensor& x, std::size_t head = 0) const;            // [B × 1]

  // Clamps every weight and bias into [-c, c].
  void clip(float c);
  float max_abs_weight() const;

  // Mean over the batch of (‖∇ₓ r(x)‖ - 1)², with the input gradient built
  // as a differentiable function of the critic parameters. Exact for
  // LeakyReLU networks, whose activation derivative is piecewise constant.
  Var32 gradient_penalty(Graph32& g, const Tensor& x, std::size_t head = 0) const;

  const CriticConfig& config() const noexcept { return cfg_; }
  Params& params() noexcept { return params_; }
  const Params& params() const noexcept { return params_; }
  const Mlp& net() const noexcept { return net_; }

 private:
  Var32 select(Graph32& g, Var32 out, std::size_t head) const;

  CriticConfig cfg_;
  Params params_;
  Mlp net_;
};

// ---- losses -------------------------------------------------------------

// Mean over the batch of ‖w - ŵ‖².
Var32 distortion_loss(Var32 w, Var32 w_hat);
float distortion_loss(const Tensor& w, const Tensor& w_hat);

// Scoring function r* used by the Wasserstein perceptual distance.
using ScoreFn = std::function<Var32(Graph32&, Var32)>;

// E[r*(ŵ)] - E[r*(w)] over the two batches.
Var32 perception_loss(Var32 w, Var32 w_hat, const ScoreFn& r_star);

// r* for a critic that scores real samples high: r* = -r_ζ, so the
// perceptual distance E[r*(ŵ)] - E[r*(w)] = E[r_ζ(w)] - E[r_ζ(ŵ)] is the
// critic's Wasserstein estimate and is non-negative for a trained critic.
ScoreFn critic_distance_score(const Critic& critic, bool frozen, std::size_t head = 0);

// Σⱼ KL(ρ ‖ ρ̂ⱼ) for Bernoulli activations; ρ̂ is clamped to [ε, 1-ε] first.
Var32 sparsity_penalty(Var32 rho_hat, double rho, double eps = 1e-6);
double sparsity_penalty(const std::vector<double>& rho_hat, double rho, double eps = 1e-6);

}  // namespace rsc
