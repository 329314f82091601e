#include "rsc/selftest.hpp"

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "rsc/channel.hpp"
#include "rsc/link.hpp"
#include "rsc/quantizer.hpp"
#include "rsc/ratecontrol.hpp"
#include "rsc/session.hpp"
#include "rsc/sources.hpp"
#include "rsc/training.hpp"

namespace rsc {
namespace {

using Clock = std::chrono::steady_clock;

std::string printf_str(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string printf_str(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

template <typename F>
CheckResult timed(int id, std::string name, F body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

// sup |F_n(x) - F(x)| against U[lo, hi).
double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = std::clamp((x[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

// Small Gaussian-toy model used by the model-level checks.
TrainConfig toy_config(std::uint64_t seed) {
  TrainConfig c;
  c.codec.input_dim = 8;
  c.codec.latent_dim = 8;
  c.codec.encoder_hidden = {32, 16};
  c.codec.decoder_hidden = {16, 32};
  c.codec.bounded_output = false;
  c.critic.input_dim = 8;
  c.critic.hidden = {16};
  c.seed = seed;
  return c;
}

}  // namespace

CheckResult check_dither_bound(std::uint64_t seed) {
  return timed(1, "dither bound |Q(y-u)+u-y| <= step/2", [&](CheckResult& r) {
    std::size_t violations = 0, total = 0;
    double worst = 0;
    for (int levels : {3, 16}) {
      const QuantizerConfig q(levels);
      const double half = q.step() / 2, reach = 1.0 - half;
      constexpr std::size_t n = 500000;
      RngStream ys(seed, static_cast<std::uint64_t>(levels));
      const Tensor y = draw_uniform(ys, n, -reach, reach);
      const CommonRandomness cr{seed, static_cast<std::uint64_t>(levels)};
      const Tensor u = dither(cr, n, q.step());
      const Tensor z = quantize(y, u, q);
      for (std::size_t i = 0; i < n; ++i) {
        const double err = std::abs(static_cast<double>(z[i]) + u[i] - y[i]);
        worst = std::max(worst, err - half);
        if (err > half + 1e-6) ++violations;
      }
      total += n;
    }
    r.passed = violations == 0;
    r.detail = printf_str("%zu/%zu violations, max excess %.3g", violations, total, worst);
  });
}

CheckResult check_uniform_error(std::uint64_t seed) {
  return timed(2, "end-to-end error ~ U[-step/2, step/2) and matches the proxy",
               [&](CheckResult& r) {
    const QuantizerConfig q(16);
    const double half = q.step() / 2;
    constexpr std::size_t n = 100000;
    double worst_one = 0, worst_two = 0;
    const double ys[] = {-0.8, -0.3, 0.0, 0.41, 0.9};
    for (std::size_t t = 0; t < 5; ++t) {
      const CommonRandomness cr{seed, t};
      const Tensor u = dither(cr, n, q.step());
      const Tensor y({n}, static_cast<float>(ys[t]));
      const Tensor z = quantize(y, u, q);
      std::vector<double> quantized(n), proxy(n);
      RngStream fresh = RngStream(seed, 100 + t);
      for (std::size_t i = 0; i < n; ++i) {
        quantized[i] = static_cast<double>(z[i]) + u[i] - y[i];
        // y + u' - y with a fresh u', computed as the proxy computes it.
        const float yp = static_cast<float>(ys[t]) + uniform_to_range(fresh.next_uniform(), -half, half);
        proxy[i] = static_cast<double>(yp) - y[i];
      }
      worst_one = std::max(worst_one, ks_uniform(quantized, -half, half));
      worst_two = std::max(worst_two, ks_two_sample(quantized, proxy));
    }
    r.passed = worst_one < 0.01 && worst_two < 0.015;
    r.detail = printf_str("max KS vs uniform %.4f (< 0.01), max two-sample KS %.4f (< 0.015)",
                          worst_one, worst_two);
  });
}

CheckResult check_common_randomness(std::uint64_t seed) {
  return timed(3, "encoder/decoder dither identical from shared seeds", [&](CheckResult& r) {
    const QuantizerConfig q(16);
    std::size_t mismatches = 0, collisions = 0;
    Tensor previous;
    for (std::uint64_t s = 0; s < 10000; ++s) {
      const CommonRandomness enc{seed, s};
      CommonRandomness dec;
      dec.seed = seed;
      dec.session_id = s;
      const Tensor a = dither(enc, 12, q.step());
      const Tensor b = dither(dec, 12, q.step());
      if (std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) != 0) ++mismatches;
      if (s > 0 && a == previous) ++collisions;
      previous = a;
    }
    r.passed = mismatches == 0 && collisions == 0;
    r.detail = printf_str("%zu mismatches over 10000 sessions, %zu repeated across sessions",
                          mismatches, collisions);
  });
}

CheckResult check_drop_law(std::uint64_t seed) {
  return timed(4, "tail-drop law Pr(D < psi K) = psi^0.67 and rate weights", [&](CheckResult& r) {
    constexpr std::size_t K = 12;
    const RateSchedule sched(K, kDefaultDropExponent);
    RngStream rng(seed, 0);
    double worst_cdf = 0;
    {
      constexpr std::size_t n = 100000;
      std::vector<std::size_t> depth(n);
      for (auto& d : depth) d = K - sample_rate(sched, rng);
      for (double psi : {0.25, 0.5, 0.75}) {
        const double thresh = psi * K;
        const auto hits = std::count_if(depth.begin(), depth.end(),
                                        [&](std::size_t d) { return static_cast<double>(d) < thresh; });
        worst_cdf = std::max(worst_cdf, std::abs(static_cast<double>(hits) / n -
                                                 std::pow(psi, kDefaultDropExponent)));
      }
    }
    double worst_bin = 0;
    {
      constexpr std::size_t n = 1000000;
      std::vector<double> hist(K, 0.0);
      for (std::size_t i = 0; i < n; ++i) hist[sample_rate(sched, rng) - 1] += 1.0 / n;
      for (std::size_t k = 1; k <= K; ++k) {
        worst_bin = std::max(worst_bin, std::abs(hist[k - 1] - sched.weight(k)));
      }
    }
    r.passed = worst_cdf <= 0.02 && worst_bin <= 0.01;
    r.detail = printf_str("max CDF error %.4f (<= 0.02), max weight error %.4f (<= 0.01)",
                          worst_cdf, worst_bin);
  });
}

CheckResult check_channel_calibration(std::uint64_t seed) {
  return timed(5, "AWGN calibration within 0.1 dB", [&](CheckResult& r) {
    RngStream src(seed, 0);
    const Tensor z = draw_uniform(src, 1000000, -1.0, 1.0).reshaped({1000, 1000});
    double worst = 0;
    std::string detail;
    for (double db : {0.0, 5.0, 10.0, 20.0}) {
      const Tensor out = transmit(z, ChannelConfig::awgn(db), RngStream(seed, 1 + static_cast<std::uint64_t>(db)));
      const double measured = measure_snr(z, out);
      worst = std::max(worst, std::abs(measured - db));
      detail += printf_str("%s%g->%.3f", detail.empty() ? "" : ", ", db, measured);
    }
    r.passed = worst <= 0.1;
    r.detail = detail + printf_str(" dB; max error %.4f", worst);
  });
}

// ---- gradient check -------------------------------------------------------------

namespace {

struct GradCase {
  std::size_t b, n, m, p, keep;
  std::uint64_t seed;
};

// Scalar loss touching every differentiable op, parameterized by `ps`.
Var<double> grad_case_loss(Graph<double>& g, ParameterSet<double>& ps, const GradCase& c) {
  Var<double> x = g.param(ps.at("x"));
  Var<double> w = g.param(ps.at("w"));
  Var<double> bias = g.param(ps.at("b"));
  Var<double> gamma = g.param(ps.at("gamma"));
  Var<double> beta = g.param(ps.at("beta"));
  Var<double> v = g.param(ps.at("v"));

  Var<double> h1 = ad::add(ad::matmul(x, w), bias);
  Var<double> bn = ad::batch_norm_train(h1, gamma, beta, 1e-5).out;
  BasicTensor<double> mu({c.m}, 0.1), var({c.m}, 1.5);
  Var<double> bn_eval = ad::batch_norm_eval(h1, gamma, beta, mu, var, 1e-5);
  Var<double> h2 = ad::leaky_relu(bn, 0.2);
  Var<double> h3 = ad::mul(ad::tanh(h2), ad::sigmoid(bn_eval));
  Var<double> h4 = ad::sub(h3, ad::scale(h1, 0.3));
  RngStream proxy(c.seed, 77);
  Var<double> h5 = ad::mask_tail(training_proxy(h4, proxy, 0.25), c.keep);
  Var<double> h6 = ad::matmul_bt(h5, v);
  Var<double> sq = ad::square(h6);
  Var<double> lg = ad::log(ad::add(sq, g.constant(BasicTensor<double>::scalar(1.0))));
  Var<double> rt = ad::sqrt(sq, 1e-2);
  Var<double> cl = ad::clamp(h6, -0.7, 0.7);
  Var<double> loss = ad::add(ad::mean(ad::row_sum(lg)), ad::sum(ad::column_mean(rt)));
  loss = ad::add(loss, ad::mean(ad::neg(ad::mul(cl, h6))));
  return loss;
}

ParameterSet<double> grad_case_params(const GradCase& c) {
  RngStream rng(c.seed, 1);
  ParameterSet<double> ps;
  auto draw = [&](Shape s, double lo, double hi) {
    BasicTensor<double> t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.next_uniform();
    return t;
  };
  ps.add("x", draw({c.b, c.n}, -1, 1));
  ps.add("w", draw({c.n, c.m}, -1, 1));
  ps.add("b", draw({c.m}, -0.5, 0.5));
  ps.add("gamma", draw({c.m}, 0.5, 1.5));
  ps.add("beta", draw({c.m}, -0.5, 0.5));
  ps.add("v", draw({c.p, c.m}, -1, 1));
  return ps;
}

}  // namespace

CheckResult check_gradients(std::uint64_t seed) {
  return timed(6, "reverse-mode gradients match central differences", [&](CheckResult& r) {
    double worst = 0;
    RngStream shapes(seed, 0);
    for (int t = 0; t < 20; ++t) {
      GradCase c;
      c.b = 2 + shapes.next_below(4);
      c.n = 1 + shapes.next_below(4);
      c.m = 2 + shapes.next_below(4);
      c.p = 1 + shapes.next_below(3);
      c.keep = 1 + shapes.next_below(c.m);
      c.seed = seed * 1000 + static_cast<std::uint64_t>(t);
      ParameterSet<double> ps = grad_case_params(c);
      {
        Graph<double> g;
        g.backward(grad_case_loss(g, ps, c), &ps);
      }
      constexpr double h = 1e-6;
      double diff = 0, norm = 0;
      for (auto& p : ps) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          const double keep = p->value[i];
          p->value[i] = keep + h;
          Graph<double> gp;
          const double up = grad_case_loss(gp, ps, c).value()[0];
          p->value[i] = keep - h;
          Graph<double> gm;
          const double down = grad_case_loss(gm, ps, c).value()[0];
          p->value[i] = keep;
          const double fd = (up - down) / (2 * h);
          diff += (fd - p->grad[i]) * (fd - p->grad[i]);
          norm += fd * fd;
        }
      }
      worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
    }
    r.passed = worst < 1e-4;
    r.detail = printf_str("20 graphs, max relative error %.2e (< 1e-4)", worst);
  });
}

CheckResult check_rate_expectation(std::uint64_t seed) {
  return timed(7, "weighted per-rate loss equals sampled-rate mean", [&](CheckResult& r) {
    TrainConfig cfg = toy_config(seed);
    TrainState state(cfg);
    const Dataset data = sample_gaussian_source(
        GaussianSourceSpec::with_spectrum({4, 2, 1, 0.5, 0.25, 0.125, 0.0625, 0.03125}, 7), 256,
        RngStream(seed, 5));
    const std::size_t K = cfg.codec.latent_dim;
    const RngStream step(seed, 6);
    std::vector<double> per_rate(K + 1);
    for (std::size_t k = 1; k <= K; ++k) {
      Graph32 g;
      Var32 w = g.constant(data.samples);
      const CodecForward fwd = codec_forward_train(g, w, state.codec, cfg, step, false, false, k);
      per_rate[k] = codec_losses(g, w, fwd, state.critic, cfg).total;
    }
    const RateSchedule sched = cfg.schedule();
    double analytic = 0;
    for (std::size_t k = 1; k <= K; ++k) analytic += sched.weight(k) * per_rate[k];
    RngStream rates(seed, 8);
    double sampled = 0;
    constexpr std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) sampled += per_rate[sample_rate(sched, rates)];
    sampled /= n;
    const double rel = std::abs(sampled - analytic) / std::abs(analytic);
    r.passed = rel < 0.01;
    r.detail = printf_str("analytic %.5f, sampled %.5f, relative gap %.2e (< 1e-2)", analytic,
                          sampled, rel);
  });
}

CheckResult check_rateless_consistency(std::uint64_t seed) {
  return timed(8, "session rounds equal one-shot decoding bit-exactly", [&](CheckResult& r) {
    CodecConfig cc;  // MNIST-sized
    const Codec codec(cc, RngStream(seed, 1));
    const QuantizerConfig q(16);
    RngStream inputs(seed, 2);
    std::size_t compared = 0, mismatched = 0;
    for (const ChannelConfig& ch : {ChannelConfig::clean(), ChannelConfig::awgn(5.0)}) {
      for (std::uint64_t i = 0; i < 100; ++i) {
        const Tensor w = draw_uniform(inputs, cc.input_dim, -1, 1).reshaped({1, cc.input_dim});
        const CommonRandomness cr{seed, i};
        const SessionTrace trace = run_session(w, {&codec, nullptr, true}, q, ch,
                                               SessionPolicy::exhaust(cc.latent_dim), cr);
        for (const auto& round : trace.rounds) {
          const Tensor one_shot = reconstruct(codec, w, round.k, q, ch, cr);
          ++compared;
          if (digest(one_shot) != round.digest) ++mismatched;
        }
        if (trace.symbols_sent != trace.k_ack) ++mismatched;
      }
    }
    r.passed = mismatched == 0 && compared == 2 * 100 * cc.latent_dim;
    r.detail = printf_str("%zu/%zu rounds differ (noiseless and 5 dB)", mismatched, compared);
  });
}

CheckResult check_baseline_reduction(std::uint64_t seed) {
  return timed(11, "SC with zero sparsity weight reduces to TC", [&](CheckResult& r) {
    TrainConfig tc;
    tc.scheme = Scheme::kTc;
    tc.codec.input_dim = tc.critic.input_dim = 64;
    tc.codec.encoder_hidden = {32, 16};
    tc.codec.decoder_hidden = {16, 32};
    tc.seed = seed;
    TrainConfig sc = tc;
    sc.scheme = Scheme::kSc;
    sc.sparsity_weight = 0.0;
    TrainState a(tc), b(sc);
    RngStream data(seed, 3);
    const Tensor w = draw_uniform(data, 32 * 64, -1, 1).reshaped({32, 64});
    const RngStream step(seed, 4);
    bool same = true;
    std::string detail;
    for (int s = 0; s < 3; ++s) {
      const StepLosses la = train_step_codec(w, a, tc, step.derive(s));
      const StepLosses lb = train_step_codec(w, b, sc, step.derive(s));
      same = same && la.total == lb.total && la.distortion == lb.distortion;
      if (s == 0) detail = printf_str("TC total %.9g, SC total %.9g", la.total, lb.total);
    }
    for (std::size_t i = 0; i < a.codec.params().size(); ++i) {
      same = same && a.codec.params()[i].value == b.codec.params()[i].value;
    }
    r.passed = same;
    r.detail = detail + (same ? "; losses and parameters identical" : "; mismatch");
  });
}

std::vector<CheckResult> run_selftest() {
  return {check_dither_bound(),         check_uniform_error(),       check_common_randomness(),
          check_drop_law(),             check_channel_calibration(), check_gradients(),
          check_rate_expectation(),     check_rateless_consistency(), check_baseline_reduction()};
}

std::string format_result(const CheckResult& r) {
  return printf_str("%s [%d] %s (%s, %.2f s)", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(),
                    r.detail.c_str(), r.seconds);
}

}  // namespace rsc
