#include <doctest.h>

#include <cmath>

#include "rsc/numerics/graph.hpp"
#include "rsc/numerics/kernels.hpp"
#include "rsc/numerics/optim.hpp"
#include "rsc/numerics/rng.hpp"

using namespace rsc;

TEST_SUITE("numerics") {

TEST_CASE("philox known answer") {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
}

TEST_CASE("random access matches sequential draws") {
  RngStream a(42, 3);
  const RngStream b(42, 3);
  for (std::uint64_t i = 0; i < 100; ++i) CHECK(a.next_uniform() == b.uniform_at(i));
  CHECK(RngStream(42, 3).derive(1).uniform_at(0) != RngStream(42, 3).derive(2).uniform_at(0));
}

TEST_CASE("uniform and gaussian draws") {
  RngStream rng(7, 0);
  const Tensor u = draw_uniform(rng, 100000, -2.0, 3.0);
  double mean = 0;
  for (float v : u.values()) {
    REQUIRE(v >= -2.0f);
    REQUIRE(v < 3.0f);
    mean += v / 100000.0;
  }
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  const Tensor g = draw_gaussian(rng, 100000, 1.0, 2.0);
  double m = 0, s = 0;
  for (float v : g.values()) m += v / 100000.0;
  for (float v : g.values()) s += (v - m) * (v - m) / 100000.0;
  CHECK(m == doctest::Approx(1.0).epsilon(0.03));
  CHECK(std::sqrt(s) == doctest::Approx(2.0).epsilon(0.02));
  CHECK_THROWS_AS(draw_uniform(rng, 4, 1.0, 1.0), InvalidRange);
  CHECK_THROWS_AS(draw_gaussian(rng, 4, 0.0, -1.0), InvalidRange);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(7) < 7);
}

TEST_CASE("parallel kernels equal the serial reference bit for bit") {
  RngStream rng(1, 1);
  for (auto [m, k, n] : {std::tuple{1, 3, 5}, {64, 128, 96}, {300, 70, 200}}) {
    const Tensor a = draw_uniform(rng, m * k, -1, 1), b = draw_uniform(rng, k * n, -1, 1);
    std::vector<float> c1(m * n), c2(m * n);
    kernels::reference::gemm(a.data(), b.data(), c1.data(), m, k, n);
    kernels::gemm(a.data(), b.data(), c2.data(), m, k, n);
    CHECK(c1 == c2);
    // Aᵀ·B with A [m×k] viewed from the same buffer: B needs m rows.
    const Tensor bt = draw_uniform(rng, m * n, -1, 1);
    std::vector<float> d1(k * n), d2(k * n);
    kernels::reference::gemm_tn(a.data(), bt.data(), d1.data(), m, k, n);
    kernels::gemm_tn(a.data(), bt.data(), d2.data(), m, k, n);
    CHECK(d1 == d2);
    const Tensor bn = draw_uniform(rng, n * k, -1, 1);
    std::vector<float> e1(m * n), e2(m * n);
    kernels::reference::gemm_nt(a.data(), bn.data(), e1.data(), m, k, n);
    kernels::gemm_nt(a.data(), bn.data(), e2.data(), m, k, n);
    CHECK(e1 == e2);
    std::vector<float> s1(k), s2(k);
    kernels::reference::column_sums(a.data(), s1.data(), m, k);
    kernels::column_sums(a.data(), s2.data(), m, k);
    CHECK(s1 == s2);
  }
}

TEST_CASE("tensor shape errors") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeMismatch);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeMismatch);
  CHECK_THROWS_AS(ops::matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeMismatch);
  CHECK_THROWS_AS(ops::add(Tensor({2, 3}), Tensor({3, 2})), ShapeMismatch);
  const Tensor row = Tensor::vector({1, 2, 3});
  const Tensor sum = ops::add(Tensor({2, 3}, 1.0f), row);
  CHECK(sum.at(1, 2) == 4.0f);
}

TEST_CASE("backward through a small graph") {
  ParameterSet<double> ps;
  auto& w = ps.add("w", Tensor64::matrix(2, 1, {3.0, -1.0}));
  Graph<double> g;
  Var<double> x = g.constant(Tensor64::matrix(1, 2, {2.0, 5.0}));
  Var<double> y = ad::matmul(x, g.param(w));  // 6 - 5 = 1
  g.backward(ad::sum(ad::square(y)), &ps);
  CHECK(w.grad[0] == doctest::Approx(4.0));   // 2·y·x0
  CHECK(w.grad[1] == doctest::Approx(10.0));  // 2·y·x1
}

TEST_CASE("non-scalar loss and disconnected parameters") {
  ParameterSet<float> ps;
  auto& a = ps.add("a", Tensor({2}, 1.0f));
  ps.add("unused", Tensor({2}, 1.0f));
  Graph<float> g;
  Var<float> va = g.param(a);
  CHECK_THROWS_AS(g.backward(va, &ps), NonScalarLoss);
  g.backward(ad::sum(va), &ps);
  REQUIRE(g.warnings().size() == 1);
  CHECK(g.warnings()[0] == "DisconnectedParameter: unused");
}

TEST_CASE("log domain and non-finite results") {
  Graph<float> g;
  CHECK_THROWS_AS(ad::log(g.constant(Tensor::vector({1.0f, 0.0f}))), DomainError);
  CHECK_THROWS_AS(ops::scale(Tensor::vector({1e30f}), 1e30f), NonFiniteResult);
}

TEST_CASE("optimizers move against the gradient") {
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kRmsprop, OptimizerKind::kAdam}) {
    ParameterSet<float> ps;
    auto& p = ps.add("p", Tensor::vector({1.0f, -1.0f}));
    p.grad = Tensor::vector({0.5f, -0.5f});
    OptimizerState<float> st;
    optimizer_step(ps, st, OptimizerConfig{kind, 0.1});
    CHECK(p.value[0] < 1.0f);
    CHECK(p.value[1] > -1.0f);
    CHECK(st.steps == 1);
  }
  CHECK(parse_optimizer_kind("adam") == OptimizerKind::kAdam);
  CHECK_THROWS(parse_optimizer_kind("lbfgs"));
}

TEST_CASE("batch norm normalizes each column") {
  ParameterSet<double> ps;
  auto& gamma = ps.add("g", Tensor64({2}, 1.0));
  auto& beta = ps.add("b", Tensor64({2}, 0.0));
  Graph<double> g;
  auto bn = ad::batch_norm_train(g.constant(Tensor64::matrix(3, 2, {1, 10, 2, 20, 3, 30})),
                                 g.param(gamma), g.param(beta), 1e-12);
  const auto& out = bn.out.value();
  CHECK(out.at(0, 0) == doctest::Approx(-std::sqrt(1.5)));
  CHECK(out.at(2, 1) == doctest::Approx(std::sqrt(1.5)));
  CHECK(bn.batch_mean[1] == doctest::Approx(20.0));
  CHECK(bn.batch_var[0] == doctest::Approx(2.0 / 3.0));
}

}
