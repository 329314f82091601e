#pragma once

// Tape-based reverse-mode differentiation over BasicTensor<T>.
//
// A Graph records every operation eagerly: the forward value is computed when
// the op is called and a backward closure is appended to the tape. Nodes are
// created in topological order by construction, so backward() is a single
// reverse sweep that visits each node once.
//
// Only the operations the codec, critic and losses need are provided.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "rsc/numerics/kernels.hpp"
#include "rsc/numerics/ops.hpp"
#include "rsc/numerics/tensor.hpp"

namespace rsc {

template <typename T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool trainable = true;
};

// Owns named parameters at stable addresses; iteration order is insertion
// order, which fixes checkpoint layout and optimizer traversal.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, BasicTensor<T> value, bool trainable = true) {
    if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->grad = BasicTensor<T>(value.shape());
    p->value = std::move(value);
    p->trainable = trainable;
    index_[name] = items_.size();
    items_.push_back(std::move(p));
    return *items_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }
  Parameter<T>& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw ConfigError("unknown parameter " + name);
  }

  void zero_grad() {
    for (auto& p : items_) p->grad.fill(T{0});
  }

  std::size_t size() const noexcept { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *items_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
class Graph;

template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const BasicTensor<T>& value() const { return graph->value(id); }
  const Shape& shape() const { return value().shape(); }
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;  // empty until something flows into it
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(BasicTensor<T> value) {
    return push(std::move(value), false, nullptr);
  }

  // Leaf bound to a parameter. Repeated calls for the same parameter share
  // one node so the gradient accumulates in one place.
  Var<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    Var<T> v = push(p.value, p.trainable, nullptr);
    nodes_[v.id].param = &p;
    param_nodes_[&p] = v.id;
    return v;
  }

  // Generic op record; used by the free functions below.
  Var<T> record(BasicTensor<T> value, std::initializer_list<Var<T>> parents,
                BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    Var<T> v = push(std::move(value), needs, nullptr);
    if (needs) nodes_[v.id].backward = std::move(backward);
    return v;
  }

  const BasicTensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  const BasicTensor<T>& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds g into the gradient slot of node `id` (no-op for constants).
  void accumulate(std::size_t id, const BasicTensor<T>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
      n.grad = g;
      return;
    }
    kernels::zip(n.grad.data(), g.data(), n.grad.data(), g.size(),
                 [](T a, T b) { return a + b; });
  }

  // Reverse sweep from a scalar loss. Gradients of every parameter leaf are
  // added into Parameter::grad. When `params` is given, its gradients are
  // zeroed first, and every trainable member that the loss does not reach
  // keeps a zero gradient and is reported through warnings().
  void backward(Var<T> loss, ParameterSet<T>* params = nullptr) {
    if (loss.graph != this) throw ShapeMismatch("loss belongs to another graph");
    if (nodes_[loss.id].value.size() != 1) {
      throw NonScalarLoss("loss has shape " + shape_str(nodes_[loss.id].value.shape()));
    }
    if (params) params->zero_grad();
    warnings_.clear();
    accumulate(loss.id, BasicTensor<T>(nodes_[loss.id].value.shape(), T{1}));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        auto& pg = n.param->grad;
        if (pg.shape() != n.grad.shape()) pg = BasicTensor<T>(n.grad.shape());
        kernels::zip(pg.data(), n.grad.data(), pg.data(), pg.size(),
                     [](T a, T b) { return a + b; });
      }
    }
    if (params) {
      for (auto& p : *params) {
        if (!p->trainable) continue;
        auto it = param_nodes_.find(p.get());
        if (it == param_nodes_.end() || nodes_[it->second].grad.empty()) {
          warnings_.push_back("DisconnectedParameter: " + p->name);
        }
      }
    }
  }

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  Var<T> push(BasicTensor<T> value, bool requires_grad, Parameter<T>* param) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.param = param;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  std::vector<std::string> warnings_;
};

namespace ad {

namespace detail {

template <typename T>
void check_same_graph(Var<T> a, Var<T> b) {
  if (a.graph != b.graph) throw ShapeMismatch("operands from different graphs");
}

// Reduces an output-shaped gradient to the shape of a broadcast operand.
template <typename T>
BasicTensor<T> reduce_to(const BasicTensor<T>& g, const BasicTensor<T>& like,
                         ops::Broadcast kind) {
  switch (kind) {
    case ops::Broadcast::kSame:
      return g;
    case ops::Broadcast::kScalar:
      return BasicTensor<T>(like.shape(), ops::sum(g));
    case ops::Broadcast::kRow: {
      BasicTensor<T> out(like.shape());
      kernels::column_sums(g.data(), out.data(), g.rows(), g.cols());
      return out;
    }
  }
  return g;
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::check_same_graph(a, b);
  const auto kind = ops::broadcast_kind(a.value(), b.value(), "add");
  return a.graph->record(
      ops::add(a.value(), b.value()), {a, b},
      [a, b, kind](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);
        g.accumulate(a.id, dy);
        if (g.requires_grad(b.id)) {
          g.accumulate(b.id, detail::reduce_to(dy, g.value(b.id), kind));
        }
      });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::check_same_graph(a, b);
  const auto kind = ops::broadcast_kind(a.value(), b.value(), "sub");
  return a.graph->record(
      ops::sub(a.value(), b.value()), {a, b},
      [a, b, kind](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);
        g.accumulate(a.id, dy);
        if (g.requires_grad(b.id)) {
          g.accumulate(b.id, ops::scale(detail::reduce_to(dy, g.value(b.id), kind), T{-1}));
        }
      });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::check_same_graph(a, b);
  const auto kind = ops::broadcast_kind(a.value(), b.value(), "mul");
  return a.graph->record(
      ops::mul(a.value(), b.value()), {a, b},
      [a, b, kind](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);
        if (g.requires_grad(a.id)) g.accumulate(a.id, ops::mul(dy, g.value(b.id)));
        if (g.requires_grad(b.id)) {
          g.accumulate(b.id, detail::reduce_to(ops::mul(dy, g.value(a.id)),
                                               g.value(b.id), kind));
        }
      });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  return a.graph->record(ops::scale(a.value(), s), {a},
                         [a, s](Graph<T>& g, std::size_t self) {
                           g.accumulate(a.id, ops::scale(g.grad(self), s));
                         });
}

template <typename T>
Var<T> neg(Var<T> a) {
  return scale(a, T{-1});
}

// a[m×k] · b[k×n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::check_same_graph(a, b);
  if (a.value().rank() != 2 || b.value().rank() != 2) {
    throw ShapeMismatch("ad::matmul expects matrices");
  }
  return a.graph->record(
      ops::matmul(a.value(), b.value()), {a, b},
      [a, b](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);
        const auto& av = g.value(a.id);
        const auto& bv = g.value(b.id);
        const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
        if (g.requires_grad(a.id)) {
          BasicTensor<T> da({m, k});
          kernels::gemm_nt(dy.data(), bv.data(), da.data(), m, n, k);
          g.accumulate(a.id, da);
        }
        if (g.requires_grad(b.id)) {
          BasicTensor<T> db({k, n});
          kernels::gemm_tn(av.data(), dy.data(), db.data(), m, k, n);
          g.accumulate(b.id, db);
        }
      });
}

// a[m×k] · b[n×k]ᵀ
template <typename T>
Var<T> matmul_bt(Var<T> a, Var<T> b) {
  detail::check_same_graph(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) {
    throw ShapeMismatch("ad::matmul_bt " + shape_str(av.shape()) + " · " +
                        shape_str(bv.shape()) + "ᵀ");
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  BasicTensor<T> out({m, n});
  kernels::gemm_nt(av.data(), bv.data(), out.data(), m, k, n);
  require_finite(out, "matmul_bt");
  return a.graph->record(
      std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);  // [m×n]
        if (g.requires_grad(a.id)) {
          BasicTensor<T> da({m, k});
          kernels::gemm(dy.data(), g.value(b.id).data(), da.data(), m, n, k);
          g.accumulate(a.id, da);
        }
        if (g.requires_grad(b.id)) {
          BasicTensor<T> db({n, k});
          kernels::gemm_tn(dy.data(), g.value(a.id).data(), db.data(), m, n, k);
          g.accumulate(b.id, db);
        }
      });
}

template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, const char* name, F f, DF df) {
  BasicTensor<T> out(a.shape());
  kernels::map(a.value().data(), out.data(), out.size(), f);
  require_finite(out, name);
  return a.graph->record(std::move(out), {a}, [a, df](Graph<T>& g, std::size_t self) {
    const auto& x = g.value(a.id);
    const auto& y = g.value(self);
    const auto& dy = g.grad(self);
    BasicTensor<T> dx(x.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = dy[i] * df(x[i], y[i]);
    g.accumulate(a.id, dx);
  });
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T slope) {
  return unary(
      a, "leaky_relu", [slope](T x) { return x > T{0} ? x : slope * x; },
      [slope](T x, T) { return x > T{0} ? T{1} : slope; });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return unary(
      a, "tanh", [](T x) { return std::tanh(x); },
      [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary(
      a, "sigmoid", [](T x) { return T{1} / (T{1} + std::exp(-x)); },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> square(Var<T> a) {
  return unary(
      a, "square", [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

template <typename T>
Var<T> log(Var<T> a) {
  for (T v : a.value().values()) {
    if (!(v > T{0})) throw DomainError("log of non-positive value");
  }
  return unary(
      a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

// sqrt(x + eps); eps keeps the derivative finite at zero.
template <typename T>
Var<T> sqrt(Var<T> a, T eps) {
  return unary(
      a, "sqrt", [eps](T x) { return std::sqrt(x + eps); },
      [](T, T y) { return T{0.5} / y; });
}

// Saturating clamp; the gradient is zero wherever the bound is active.
template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  return unary(
      a, "clamp", [lo, hi](T x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](T x, T) { return (x < lo || x > hi) ? T{0} : T{1}; });
}

template <typename T>
Var<T> sum(Var<T> a) {
  return a.graph->record(BasicTensor<T>::scalar(ops::sum(a.value())), {a},
                         [a](Graph<T>& g, std::size_t self) {
                           g.accumulate(a.id, BasicTensor<T>(g.value(a.id).shape(),
                                                             g.grad(self)[0]));
                         });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const T inv = T{1} / static_cast<T>(a.value().size());
  return scale(sum(a), inv);
}

// [m×n] → [m]: per-row sum.
template <typename T>
Var<T> row_sum(Var<T> a) {
  const auto& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  BasicTensor<T> out({m});
  for (std::size_t i = 0; i < m; ++i) {
    T acc{0};
    for (std::size_t j = 0; j < n; ++j) acc += x[i * n + j];
    out[i] = acc;
  }
  require_finite(out, "row_sum");
  return a.graph->record(std::move(out), {a}, [a, m, n](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    BasicTensor<T> dx(g.value(a.id).shape());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] = dy[i];
    }
    g.accumulate(a.id, dx);
  });
}

// [m×n] → [n]: per-column mean.
template <typename T>
Var<T> column_mean(Var<T> a) {
  const std::size_t m = a.value().rows(), n = a.value().cols();
  return a.graph->record(ops::column_mean(a.value()), {a},
                         [a, m, n](Graph<T>& g, std::size_t self) {
                           const auto& dy = g.grad(self);
                           const T inv = T{1} / static_cast<T>(m);
                           BasicTensor<T> dx(g.value(a.id).shape());
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) dx[i * n + j] = dy[j] * inv;
                           }
                           g.accumulate(a.id, dx);
                         });
}

// Zeroes every column at index >= keep of a [m×K] matrix (or a [K] vector).
template <typename T>
Var<T> mask_tail(Var<T> a, std::size_t keep) {
  const std::size_t n = a.value().cols();
  auto masked = [n, keep](const BasicTensor<T>& x) {
    BasicTensor<T> out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t c = keep; c < n; ++c) out[r * n + c] = T{0};
    }
    return out;
  };
  return a.graph->record(masked(a.value()), {a},
                         [a, masked](Graph<T>& g, std::size_t self) {
                           g.accumulate(a.id, masked(g.grad(self)));
                         });
}

// Training-mode batch normalization over the rows of x[m×n] with learnable
// per-column scale gamma[n] and shift beta[n]. Biased batch variance.
template <typename T>
struct BatchNormResult {
  Var<T> out;
  BasicTensor<T> batch_mean;
  BasicTensor<T> batch_var;
};

template <typename T>
BatchNormResult<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw ShapeMismatch("batch_norm: parameter width");
  }
  auto mu = ops::column_mean(xv);
  auto var = ops::column_variance(xv, mu);
  BasicTensor<T> inv_std({n});
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = T{1} / std::sqrt(var[j] + eps);
  BasicTensor<T> xhat(xv.shape());
  BasicTensor<T> out(xv.shape());
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (xv[i * n + j] - mu[j]) * inv_std[j];
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  require_finite(out, "batch_norm");
  Var<T> y = x.graph->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, m, n](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);
        const auto& gv = g.value(gamma.id);
        BasicTensor<T> dgamma({n}), dbeta({n});
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            dgamma[j] += dy[i * n + j] * xhat[i * n + j];
            dbeta[j] += dy[i * n + j];
          }
        }
        if (g.requires_grad(x.id)) {
          // dx = γ·inv_std/m · (m·dy − Σdy − x̂·Σ(dy·x̂))
          BasicTensor<T> dx({m, n});
          const T inv_m = T{1} / static_cast<T>(m);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              dx[i * n + j] = gv[j] * inv_std[j] * inv_m *
                              (static_cast<T>(m) * dy[i * n + j] - dbeta[j] -
                               xhat[i * n + j] * dgamma[j]);
            }
          }
          g.accumulate(x.id, dx);
        }
        g.accumulate(gamma.id, dgamma);
        g.accumulate(beta.id, dbeta);
      });
  return {y, std::move(mu), std::move(var)};
}

// Inference-mode batch normalization with fixed statistics.
template <typename T>
Var<T> batch_norm_eval(Var<T> x, Var<T> gamma, Var<T> beta,
                       const BasicTensor<T>& mean, const BasicTensor<T>& var, T eps) {
  const std::size_t n = x.value().cols();
  if (mean.size() != n || var.size() != n) throw ShapeMismatch("batch_norm_eval stats");
  BasicTensor<T> inv_std({n});
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = T{1} / std::sqrt(var[j] + eps);
  Graph<T>& g = *x.graph;
  Var<T> centered = sub(x, g.constant(mean));
  Var<T> normed = mul(centered, g.constant(inv_std));
  return add(mul(normed, gamma), beta);
}

}  // namespace ad
}  // namespace rsc
