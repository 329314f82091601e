#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "rsc/numerics/graph.hpp"

namespace rsc {

enum class OptimizerKind { kSgd, kRmsprop, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double rho = 0.9;     // RMSProp squared-gradient decay
  double beta1 = 0.9;   // Adam
  double beta2 = 0.999; // Adam
  double eps = 1e-8;
};

// Per-parameter moment buffers, keyed by parameter name.
template <typename T>
struct OptimizerState {
  std::int64_t steps = 0;
  std::map<std::string, BasicTensor<T>> first;   // Adam m
  std::map<std::string, BasicTensor<T>> second;  // RMSProp / Adam v
};

// One update of every trainable parameter from its stored gradient.
// Deterministic: the result depends only on (params, grads, state, cfg).
template <typename T>
void optimizer_step(ParameterSet<T>& params, OptimizerState<T>& state,
                    const OptimizerConfig& cfg) {
  ++state.steps;
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  for (auto& pp : params) {
    Parameter<T>& p = *pp;
    if (!p.trainable) continue;
    if (p.grad.shape() != p.value.shape()) {
      throw ShapeMismatch("gradient for " + p.name + " is " + shape_str(p.grad.shape()) +
                          ", parameter is " + shape_str(p.value.shape()));
    }
    const std::size_t n = p.value.size();
    T* w = p.value.data();
    const T* g = p.grad.data();
    switch (cfg.kind) {
      case OptimizerKind::kSgd:
        for (std::size_t i = 0; i < n; ++i) w[i] -= lr * g[i];
        break;
      case OptimizerKind::kRmsprop: {
        auto& v = state.second.try_emplace(p.name, p.value.shape()).first->second;
        const T rho = static_cast<T>(cfg.rho);
        for (std::size_t i = 0; i < n; ++i) {
          v[i] = rho * v[i] + (T{1} - rho) * g[i] * g[i];
          w[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
        }
        break;
      }
      case OptimizerKind::kAdam: {
        auto& m = state.first.try_emplace(p.name, p.value.shape()).first->second;
        auto& v = state.second.try_emplace(p.name, p.value.shape()).first->second;
        const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
        const T c1 = T{1} - static_cast<T>(std::pow(cfg.beta1, state.steps));
        const T c2 = T{1} - static_cast<T>(std::pow(cfg.beta2, state.steps));
        for (std::size_t i = 0; i < n; ++i) {
          m[i] = b1 * m[i] + (T{1} - b1) * g[i];
          v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
          w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
        break;
      }
    }
    require_finite(p.value, "optimizer_step");
  }
}

}  // namespace rsc
