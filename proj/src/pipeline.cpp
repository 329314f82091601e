#include "rsc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "rsc/link.hpp"

namespace rsc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint64_t kCriticInitTag = 0xC817;
constexpr std::uint64_t kCriticPickTag = 0x91C4;

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CommonRandomness point_randomness(std::uint64_t seed, std::size_t k, const ChannelConfig& ch) {
  return {seed, fnv("k=" + std::to_string(k) + ";snr=" + to_string(ch))};
}

MatrixXd to_matrix(const Tensor64& t) {
  MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t[i * t.cols() + j];
  }
  return m;
}

VectorXd to_vector(const Tensor64& t) {
  VectorXd v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v(i) = t[i];
  return v;
}

// Principal square root of a symmetric PSD matrix; tiny negative
// eigenvalues from round-off are clamped to zero.
MatrixXd sqrt_psd(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double bits_per_pixel(std::size_t rate_k, int levels, std::size_t dim) {
  return static_cast<double>(rate_k) * std::log2(static_cast<double>(levels)) /
         static_cast<double>(dim);
}

// ---- datasets -----------------------------------------------------------------

GaussianSourceSpec gaussian_spec(const KvConfig& kv) {
  std::vector<double> spectrum;
  for (const auto& s : split(kv.get("data.spectrum"), ',')) spectrum.push_back(std::stod(s));
  const auto dim = static_cast<std::size_t>(kv.get_int("data.dim"));
  if (spectrum.size() != dim) {
    throw ConfigError("data.spectrum has " + std::to_string(spectrum.size()) +
                      " entries for data.dim " + std::to_string(dim));
  }
  return GaussianSourceSpec::with_spectrum(spectrum, kv.get_u64("data.source_seed"));
}

Dataset load_dataset(const KvConfig& kv, Split split) {
  const SourceKind kind = parse_source_kind(kv.get("data.kind"));
  if (kind == SourceKind::kGaussian) {
    const std::size_t n = split == Split::kTrain
                              ? static_cast<std::size_t>(kv.get_int("data.samples"))
                              : static_cast<std::size_t>(kv.get_int("eval.samples"));
    Dataset ds = sample_gaussian_source(gaussian_spec(kv),
                                        n, RngStream(kv.get_u64("data.source_seed"),
                                                     split == Split::kTrain ? 1 : 2));
    ds.split = split;
    return ds;
  }
  const std::filesystem::path dir = kv.get("data.path");
  if (dir.empty()) throw ConfigError("data.path is not set");
  const std::string stem = split == Split::kTrain ? "train" : "t10k";
  auto pick = [&](const std::string& name) {
    for (const auto& cand : {dir / (name + ".gz"), dir / name}) {
      if (std::filesystem::exists(cand)) return cand;
    }
    throw IoError("missing " + (dir / name).string() + "[.gz]");
  };
  Dataset ds = load_mnist_idx(pick(stem + "-images-idx3-ubyte"),
                              pick(stem + "-labels-idx1-ubyte"), split);
  const auto limit = static_cast<std::size_t>(kv.get_int("data.limit"));
  if (limit > 0 && split == Split::kTrain) return ds.head(limit);
  if (split == Split::kTest) {
    const auto n = static_cast<std::size_t>(kv.get_int("eval.samples"));
    if (n > 0) return ds.head(n);
  }
  return ds;
}

// ---- evaluation -----------------------------------------------------------------

Tensor reconstruct_dataset(const LoadedModel& model, const Dataset& data, std::size_t k,
                           const ChannelConfig& channel, std::uint64_t seed, bool proxy) {
  const TrainConfig& cfg = model.config;
  const std::size_t K = cfg.codec.latent_dim, d = data.dim(), n = data.size();
  if (k < 1 || k > K) throw RateOutOfRange("eval rate " + std::to_string(k));
  const CommonRandomness cr = point_randomness(seed, k, channel);
  OneShotOptions opts;
  opts.quantize = cfg.scheme == Scheme::kRsc;
  opts.proxy = proxy;
  Tensor out({n, d});
  constexpr std::size_t kChunk = 500;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t len = std::min(kChunk, n - start);
    Tensor w({len, d});
    std::copy(data.samples.data() + start * d, data.samples.data() + (start + len) * d,
              w.data());
    const Tensor w_hat = reconstruct(model.state.codec, w, k, cfg.quantizer(), channel, cr,
                                     opts, start * K);
    std::copy(w_hat.data(), w_hat.data() + len * d, out.data() + start * d);
  }
  return out;
}

double critic_distance(const Tensor& real, const Tensor& fake, const CriticConfig& critic_cfg,
                       const EvalOptions& opts, std::uint64_t seed) {
  require_same_shape(real, fake, "critic_distance");
  TrainConfig cfg;
  cfg.critic = critic_cfg;
  cfg.critic.heads = 1;
  cfg.gradient_penalty = opts.critic_gp;
  cfg.critic_opt.lr = opts.critic_lr;
  const std::size_t steps = opts.critic_steps, batch = opts.critic_batch;
  const RngStream base(seed, kCriticInitTag);
  Critic critic(cfg.critic, base);
  OptimizerState<float> opt;
  RngStream pick = base.derive(kCriticPickTag);
  const std::size_t n = real.rows(), d = real.cols(), b = std::min(batch, n);
  Tensor rb({b, d}), fb({b, d});
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t ri = pick.next_below(n), fi = pick.next_below(n);
      std::copy(real.data() + ri * d, real.data() + (ri + 1) * d, rb.data() + i * d);
      std::copy(fake.data() + fi * d, fake.data() + (fi + 1) * d, fb.data() + i * d);
    }
    train_step_critic(rb, fb, critic, opt, cfg, pick.derive(s));
  }
  auto mean_score = [&](const Tensor& x) {
    const Tensor s = critic.score(x);
    double acc = 0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += s[i];
    return acc / static_cast<double>(s.size());
  };
  return mean_score(real) - mean_score(fake);
}

RdpPoint evaluate_point(const LoadedModel& model, std::size_t k, const ChannelConfig& channel,
                        const Dataset& data, const EvalOptions& opts) {
  const TrainConfig& cfg = model.config;
  const Tensor w_hat = reconstruct_dataset(model, data, k, channel, opts.seed, opts.proxy);
  RdpPoint p;
  p.scheme = cfg.scheme;
  p.rate_k = k;
  p.bpp = bits_per_pixel(k, cfg.levels, data.dim());
  p.snr_db = channel.snr_db;
  p.lambda = cfg.distortion_only ? std::numeric_limits<double>::infinity() : cfg.lambda;
  p.seed = cfg.seed;
  p.mse = distortion_loss(data.samples, w_hat);
  const CommonRandomness cr = point_randomness(opts.seed, k, channel);
  p.perception = critic_distance(data.samples, w_hat, cfg.critic, opts, cr.session_id ^ opts.seed);
  if (opts.oracle) p.w2 = gaussian_w2(w_hat, *opts.oracle);
  return p;
}

double gaussian_w2(const Tensor64& mean1, const Tensor64& cov1, const Tensor64& mean2,
                   const Tensor64& cov2) {
  const VectorXd m1 = to_vector(mean1), m2 = to_vector(mean2);
  const MatrixXd s1 = to_matrix(cov1), s2 = to_matrix(cov2);
  if (m1.size() != m2.size() || s1.rows() != m1.size() || s2.rows() != m2.size() ||
      s1.cols() != s1.rows() || s2.cols() != s2.rows()) {
    throw ShapeMismatch("gaussian_w2 operands");
  }
  const MatrixXd r2 = sqrt_psd(s2);
  const MatrixXd cross = sqrt_psd(r2 * s1 * r2);
  return (m1 - m2).squaredNorm() + (s1 + s2 - 2.0 * cross).trace();
}

double gaussian_w2(const Tensor& samples, const GaussianSourceSpec& source) {
  source.validate();
  const std::size_t n = samples.rows(), d = samples.cols();
  if (d != source.dim) throw ShapeMismatch("samples vs gaussian source dim");
  if (n < 2) throw EmptyDataset("need at least two samples to fit a covariance");
  Tensor64 mean({d}), cov({d, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples[i * d + j];
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = samples[i * d + a] - mean[a];
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += da * (samples[i * d + b] - mean[b]);
    }
  }
  for (std::size_t i = 0; i < d * d; ++i) cov[i] /= static_cast<double>(n - 1);
  // Collapsed reconstructions give a singular fit.
  for (std::size_t j = 0; j < d; ++j) cov[j * d + j] += 1e-6;
  return gaussian_w2(mean, cov, source.mean, source.covariance);
}

// ---- sweeps -------------------------------------------------------------------

void SweepConfig::validate() const {
  if (rates.empty()) throw ConfigError("sweep needs at least one rate");
  if (snrs.empty()) throw ConfigError("sweep needs at least one SNR");
}

SweepConfig SweepConfig::from_kv(const KvConfig& kv, std::uint64_t seed) {
  SweepConfig c;
  c.rates = kv.get_sizes("eval.rates");
  for (const auto& s : split(kv.get("eval.snrs"), ',')) c.snrs.push_back(parse_channel(s));
  c.eval.seed = seed;
  c.eval.critic_steps = static_cast<std::size_t>(kv.get_int("eval.critic_steps"));
  c.eval.critic_batch = static_cast<std::size_t>(kv.get_int("eval.critic_batch"));
  c.eval.critic_gp = kv.get_bool("eval.critic_gp");
  c.eval.critic_lr = kv.get_double("eval.critic_lr");
  c.validate();
  return c;
}

std::vector<RdpPoint> sweep(const SweepConfig& cfg, const std::vector<const LoadedModel*>& models,
                            const Dataset& data) {
  cfg.validate();
  struct Cell {
    const LoadedModel* model;
    std::size_t k;
    ChannelConfig channel;
  };
  std::vector<Cell> cells;
  for (const LoadedModel* m : models) {
    for (std::size_t k : cfg.rates) {
      for (const auto& ch : cfg.snrs) cells.push_back({m, k, ch});
    }
  }
  std::vector<RdpPoint> points(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < cells.size(); ++i) {
    points[i] = evaluate_point(*cells[i].model, cells[i].k, cells[i].channel, data, cfg.eval);
  }
  return points;
}

std::string to_csv(const std::vector<RdpPoint>& points, bool proxy_eval) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& p : points) {
    os << to_string(p.scheme) << ',' << p.rate_k << ',' << fmt(p.bpp) << ','
       << (p.snr_db ? fmt(*p.snr_db) : std::string("noiseless")) << ',' << fmt(p.lambda) << ','
       << p.seed << ',' << fmt(p.mse) << ',' << fmt(p.perception) << '\n';
  }
  if (proxy_eval) os << "# proxy-eval: additive-noise proxy in place of quantization\n";
  return os.str();
}

std::vector<RdpPoint> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw ConfigError("CSV header is not '" + std::string(kCsvHeader) + "'");
  }
  std::vector<RdpPoint> out;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ConfigError("CSV row with " + std::to_string(f.size()) + " fields");
    RdpPoint p;
    p.scheme = parse_scheme(f[0]);
    p.rate_k = std::stoul(f[1]);
    p.bpp = std::stod(f[2]);
    if (f[3] != "noiseless") p.snr_db = std::stod(f[3]);
    p.lambda = std::stod(f[4]);
    p.seed = std::stoull(f[5]);
    p.mse = std::stod(f[6]);
    p.perception = std::stod(f[7]);
    out.push_back(p);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- plots --------------------------------------------------------------------

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> pts;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string svg_plot(const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<Series>& series) {
  constexpr double W = 640, H = 440, L = 70, R = 170, T = 40, B = 55;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (auto [x, y] : s.pts) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
       << fmt(std::round(xv * 1e4) / 1e4) << "</text>\n"
       << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
       << fmt(std::round(yv * 1e4) / 1e4) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">"
     << xlabel << "</text>\n"
     << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[i].pts) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    for (auto [x, y] : series[i].pts) {
      os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    }
    const double ly = T + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << series[i].name
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::vector<std::filesystem::path> write_plots(const std::vector<RdpPoint>& points,
                                               const std::filesystem::path& dir) {
  // One curve per (scheme, snr, lambda, seed), points ordered by rate.
  std::map<std::string, std::vector<RdpPoint>> groups;
  for (const auto& p : points) {
    std::string key = to_string(p.scheme) + " " +
                      (p.snr_db ? fmt(*p.snr_db) + "dB" : std::string("clean"));
    if (p.scheme == Scheme::kRsc) key += " λ=" + fmt(p.lambda);
    groups[key].push_back(p);
  }
  std::vector<Series> d_rate, p_rate, p_d;
  for (auto& [name, pts] : groups) {
    std::stable_sort(pts.begin(), pts.end(),
                     [](const RdpPoint& a, const RdpPoint& b) { return a.rate_k < b.rate_k; });
    Series a{name, {}}, b{name, {}}, c{name, {}};
    for (const auto& p : pts) {
      a.pts.emplace_back(static_cast<double>(p.rate_k), p.mse);
      b.pts.emplace_back(static_cast<double>(p.rate_k), p.perception);
      c.pts.emplace_back(p.mse, p.perception);
    }
    d_rate.push_back(a);
    p_rate.push_back(b);
    p_d.push_back(c);
  }
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> files = {
      {"distortion_vs_rate.svg", svg_plot("Distortion vs rate", "rate k (latent symbols)", "MSE", d_rate)},
      {"perception_vs_rate.svg",
       svg_plot("Perception vs rate", "rate k (latent symbols)", "critic distance", p_rate)},
      {"perception_vs_distortion.svg",
       svg_plot("Perception vs distortion", "MSE", "critic distance", p_d)},
  };
  std::vector<std::filesystem::path> out;
  for (const auto& [name, svg] : files) {
    write_text(dir / name, svg);
    out.push_back(dir / name);
  }
  return out;
}

}  // namespace rsc
