#include "rsc/models.hpp"

#include <algorithm>
#include <cmath>

namespace rsc {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kRsc: return "RSC";
    case Scheme::kTc: return "TC";
    case Scheme::kSc: return "SC";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "RSC") return Scheme::kRsc;
  if (up == "TC") return Scheme::kTc;
  if (up == "SC") return Scheme::kSc;
  throw ConfigError("unknown scheme '" + name + "' (RSC|TC|SC)");
}

// ---- Mlp ------------------------------------------------------------------

Mlp::Mlp(Params& params, std::string prefix, std::vector<std::size_t> widths,
         bool batch_norm, bool tanh_out, RngStream init)
    : widths_(std::move(widths)), tanh_out_(tanh_out) {
  if (widths_.size() < 2) throw ConfigError(prefix + ": an MLP needs input and output widths");
  const std::size_t n_layers = widths_.size() - 1;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::size_t in = widths_[i], out = widths_[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    RngStream rng = init.derive(i);
    const std::string base = prefix + ".l" + std::to_string(i);
    Tensor w = draw_uniform(rng, in * out, -bound, bound).reshaped({in, out});
    Tensor b = draw_uniform(rng, out, -bound, bound);
    weights_.push_back(&params.add(base + ".w", std::move(w)));
    biases_.push_back(&params.add(base + ".b", std::move(b)));
    if (batch_norm && i + 1 < n_layers) {
      const std::string bn = prefix + ".bn" + std::to_string(i);
      norms_.push_back({&params.add(bn + ".gamma", Tensor({out}, 1.0f)),
                        &params.add(bn + ".beta", Tensor({out}, 0.0f)),
                        &params.add(bn + ".mean", Tensor({out}, 0.0f), false),
                        &params.add(bn + ".var", Tensor({out}, 1.0f), false)});
    }
  }
}

Var32 Mlp::forward(Graph32& g, Var32 x, Mode mode, bool update_stats) const {
  return run(g, x, mode, update_stats, false);
}

Var32 Mlp::forward_frozen(Graph32& g, Var32 x, Mode mode) const {
  return run(g, x, mode, false, true);
}

Var32 Mlp::run(Graph32& g, Var32 x, Mode mode, bool update_stats, bool frozen) const {
  if (x.value().rank() != 2 || x.value().cols() != in_dim()) {
    throw ShapeMismatch("mlp expects [B×" + std::to_string(in_dim()) + "], got " +
                        shape_str(x.shape()));
  }
  auto p = [&](Parameter<float>& param) {
    return frozen ? g.constant(param.value) : g.param(param);
  };
  Var32 h = x;
  const std::size_t n_layers = weights_.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    h = ad::add(ad::matmul(h, p(*weights_[i])), p(*biases_[i]));
    if (i + 1 == n_layers) break;
    if (!norms_.empty()) {
      const Norm& n = norms_[i];
      if (mode == Mode::kTrain) {
        auto res = ad::batch_norm_train(h, p(*n.gamma), p(*n.beta), kBatchNormEps);
        h = res.out;
        if (update_stats) {
          const std::size_t b = x.value().rows();
          const float unbias = b > 1 ? static_cast<float>(b) / static_cast<float>(b - 1) : 1.0f;
          for (std::size_t j = 0; j < res.batch_mean.size(); ++j) {
            n.mean->value[j] = (1 - kBatchNormMomentum) * n.mean->value[j] +
                               kBatchNormMomentum * res.batch_mean[j];
            n.var->value[j] = (1 - kBatchNormMomentum) * n.var->value[j] +
                              kBatchNormMomentum * res.batch_var[j] * unbias;
          }
        }
      } else {
        h = ad::batch_norm_eval(h, p(*n.gamma), p(*n.beta), n.mean->value, n.var->value,
                                kBatchNormEps);
      }
    }
    h = ad::leaky_relu(h, kLeakySlope);
  }
  return tanh_out_ ? ad::tanh(h) : h;
}

// ---- Codec ----------------------------------------------------------------

namespace {
std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden,
                               std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}
}  // namespace

Codec::Codec(const CodecConfig& cfg, RngStream init) : cfg_(cfg) {
  if (cfg.input_dim == 0 || cfg.latent_dim == 0) throw ConfigError("codec dims must be positive");
  encoder_ = Mlp(params_, "enc", chain(cfg.input_dim, cfg.encoder_hidden, cfg.latent_dim),
                 true, true, init.derive(1));
  decoder_ = Mlp(params_, "dec", chain(cfg.latent_dim, cfg.decoder_hidden, cfg.input_dim),
                 cfg.decoder_batch_norm, cfg.bounded_output, init.derive(2));
}

Var32 Codec::encode(Graph32& g, Var32 w, Mode mode, bool update_stats) const {
  return encoder_.forward(g, w, mode, update_stats);
}

Var32 Codec::decode(Graph32& g, Var32 y, Mode mode, bool update_stats) const {
  return decoder_.forward(g, y, mode, update_stats);
}

Tensor Codec::encode(const Tensor& w) const {
  Graph32 g;
  return encoder_.forward_frozen(g, g.constant(w), Mode::kEval).value();
}

Tensor Codec::decode(const Tensor& y) const {
  Graph32 g;
  return decoder_.forward_frozen(g, g.constant(y), Mode::kEval).value();
}

// ---- Critic ---------------------------------------------------------------

Critic::Critic(const CriticConfig& cfg, RngStream init) : cfg_(cfg) {
  if (cfg.heads < 1) throw ConfigError("critic needs at least one head");
  net_ = Mlp(params_, "critic", chain(cfg.input_dim, cfg.hidden, cfg.heads), false, false,
             init.derive(3));
}

namespace {

Tensor one_hot_column(std::size_t n, std::size_t i) {
  Tensor e({n, 1});
  e[i] = 1.0f;
  return e;
}

}  // namespace

Var32 Critic::select(Graph32& g, Var32 out, std::size_t head) const {
  if (head >= cfg_.heads) {
    throw RateOutOfRange("critic head " + std::to_string(head) + " of " +
                         std::to_string(cfg_.heads));
  }
  if (cfg_.heads == 1) return out;
  return ad::matmul(out, g.constant(one_hot_column(cfg_.heads, head)));
}

Var32 Critic::score(Graph32& g, Var32 x, std::size_t head) const {
  return select(g, net_.forward(g, x, Mode::kEval), head);
}

Var32 Critic::score_frozen(Graph32& g, Var32 x, std::size_t head) const {
  return select(g, net_.forward_frozen(g, x, Mode::kEval), head);
}

Tensor Critic::score(const Tensor& x, std::size_t head) const {
  Graph32 g;
  return score_frozen(g, g.constant(x), head).value();
}

void Critic::clip(float c) {
  for (auto& p : params_) {
    for (float& v : p->value.values()) v = std::clamp(v, -c, c);
  }
}

float Critic::max_abs_weight() const {
  float m = 0;
  for (const auto& p : params_) {
    for (float v : p->value.values()) m = std::max(m, std::abs(v));
  }
  return m;
}

Var32 Critic::gradient_penalty(Graph32& g, const Tensor& x, std::size_t head) const {
  const std::size_t layers = net_.layers();
  const std::size_t batch = x.rows();
  // Forward on plain tensors to record each hidden layer's activation slope.
  std::vector<Tensor> slopes;
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers; ++i) {
    Tensor a = ops::add(ops::matmul(h, net_.weight(i).value), net_.bias(i).value);
    Tensor s(a.shape());
    for (std::size_t j = 0; j < a.size(); ++j) s[j] = a[j] > 0 ? 1.0f : kLeakySlope;
    h = ops::leaky_relu(a, kLeakySlope);
    slopes.push_back(std::move(s));
  }
  // ∂r/∂x, back from the output layer: G ← (G ∘ slope_l) · W_lᵀ.
  Var32 last = g.param(net_.weight(layers - 1));
  last = select(g, last, head);  // [h × 1] column of the chosen head
  Var32 grad = ad::matmul_bt(g.constant(Tensor({batch, 1}, 1.0f)), last);
  for (std::size_t i = layers - 1; i-- > 0;) {
    grad = ad::mul(grad, g.constant(slopes[i]));
    grad = ad::matmul_bt(grad, g.param(net_.weight(i)));
  }
  Var32 norm = ad::sqrt(ad::row_sum(ad::square(grad)), 1e-12f);
  Var32 dev = ad::sub(norm, g.constant(Tensor::scalar(1.0f)));
  return ad::mean(ad::square(dev));
}

// ---- losses ---------------------------------------------------------------

Var32 distortion_loss(Var32 w, Var32 w_hat) {
  return ad::mean(ad::row_sum(ad::square(ad::sub(w, w_hat))));
}

float distortion_loss(const Tensor& w, const Tensor& w_hat) {
  require_same_shape(w, w_hat, "distortion_loss");
  double acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = static_cast<double>(w[i]) - w_hat[i];
    acc += d * d;
  }
  return static_cast<float>(acc / static_cast<double>(w.rows()));
}

Var32 perception_loss(Var32 w, Var32 w_hat, const ScoreFn& r_star) {
  if (w.value().cols() != w_hat.value().cols()) {
    throw ShapeMismatch("perception_loss: batch widths " + shape_str(w.shape()) + " vs " +
                        shape_str(w_hat.shape()));
  }
  Graph32& g = *w.graph;
  return ad::sub(ad::mean(r_star(g, w_hat)), ad::mean(r_star(g, w)));
}

ScoreFn critic_distance_score(const Critic& critic, bool frozen, std::size_t head) {
  return [&critic, frozen, head](Graph32& g, Var32 x) {
    return ad::neg(frozen ? critic.score_frozen(g, x, head) : critic.score(g, x, head));
  };
}

Var32 sparsity_penalty(Var32 rho_hat, double rho, double eps) {
  if (!(rho > 0 && rho < 1)) throw DomainError("sparsity target must lie in (0,1)");
  Graph32& g = *rho_hat.graph;
  const float r = static_cast<float>(rho);
  Var32 q = ad::clamp(rho_hat, static_cast<float>(eps), static_cast<float>(1 - eps));
  Var32 one_minus_q = ad::add(ad::neg(q), g.constant(Tensor::scalar(1.0f)));
  // KL = Σ ρ log ρ + (1-ρ) log(1-ρ) - ρ log q - (1-ρ) log(1-q)
  const float entropy_term = static_cast<float>(
      (rho * std::log(rho) + (1 - rho) * std::log(1 - rho)) * rho_hat.value().size());
  Var32 cross = ad::add(ad::scale(ad::sum(ad::log(q)), -r),
                        ad::scale(ad::sum(ad::log(one_minus_q)), r - 1.0f));
  return ad::add(cross, g.constant(Tensor::scalar(entropy_term)));
}

double sparsity_penalty(const std::vector<double>& rho_hat, double rho, double eps) {
  if (!(rho > 0 && rho < 1)) throw DomainError("sparsity target must lie in (0,1)");
  double acc = 0;
  for (double q : rho_hat) {
    q = std::clamp(q, eps, 1 - eps);
    acc += rho * std::log(rho / q) + (1 - rho) * std::log((1 - rho) / (1 - q));
  }
  return acc;
}

}  // namespace rsc
