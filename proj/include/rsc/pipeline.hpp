#pragma once

// Evaluation sweeps over (scheme, rate, SNR, λ, seed), the Gaussian W2
// oracle, CSV output and static SVG plots.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsc/channel.hpp"
#include "rsc/config.hpp"
#include "rsc/sources.hpp"
#include "rsc/training.hpp"

namespace rsc {

inline constexpr const char* kCsvHeader = "scheme,rate_k,bpp,snr_db,lambda,seed,mse,perception";

struct RdpPoint {
  Scheme scheme = Scheme::kRsc;
  std::size_t rate_k = 0;
  double bpp = 0;
  std::optional<double> snr_db;  // nullopt: noiseless
  double lambda = 0;             // +inf for distortion-only models
  std::uint64_t seed = 0;
  double mse = 0;
  double perception = 0;
  std::optional<double> w2;  // Gaussian source only; not part of the CSV
};

// rate·log2(L_q)/d.
double bits_per_pixel(std::size_t rate_k, int levels, std::size_t dim);

// ---- datasets -----------------------------------------------------------------

GaussianSourceSpec gaussian_spec(const KvConfig& kv);
// MNIST from data.path (train-/t10k- IDX files, optionally .gz), or samples
// of the configured Gaussian source. data.limit caps the MNIST size; the
// Gaussian test split has eval.samples rows.
Dataset load_dataset(const KvConfig& kv, Split split);

// ---- evaluation -----------------------------------------------------------------

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t critic_steps = 300;
  std::size_t critic_batch = 128;
  // The evaluation critic is configured here, not by the model under test,
  // so every scheme is scored by the same procedure.
  bool critic_gp = true;
  double critic_lr = 5e-4;
  // Additive-noise proxy in place of true quantization. Debugging only.
  bool proxy = false;
  const GaussianSourceSpec* oracle = nullptr;
};

// Full eval-set reconstruction at rate k through the true quantizer.
Tensor reconstruct_dataset(const LoadedModel& model, const Dataset& data, std::size_t k,
                           const ChannelConfig& channel, std::uint64_t seed, bool proxy = false);

// Trains a fresh critic between `real` and `fake` and returns the score gap
// E[r(real)] - E[r(fake)] over the full sets.
double critic_distance(const Tensor& real, const Tensor& fake, const CriticConfig& critic,
                       const EvalOptions& opts, std::uint64_t seed);

RdpPoint evaluate_point(const LoadedModel& model, std::size_t k, const ChannelConfig& channel,
                        const Dataset& data, const EvalOptions& opts);

// Squared 2-Wasserstein distance between two Gaussians.
double gaussian_w2(const Tensor64& mean1, const Tensor64& cov1, const Tensor64& mean2,
                   const Tensor64& cov2);
// Fits a Gaussian to the rows of `samples` and compares it with the source.
double gaussian_w2(const Tensor& samples, const GaussianSourceSpec& source);

// ---- sweeps -------------------------------------------------------------------

struct SweepConfig {
  std::vector<std::size_t> rates;
  std::vector<ChannelConfig> snrs;
  EvalOptions eval;

  void validate() const;
  static SweepConfig from_kv(const KvConfig& kv, std::uint64_t seed);
};

// One point per (model, rate, snr), in that nesting order regardless of the
// order in which points finish.
std::vector<RdpPoint> sweep(const SweepConfig& cfg, const std::vector<const LoadedModel*>& models,
                            const Dataset& data);

std::string to_csv(const std::vector<RdpPoint>& points, bool proxy_eval = false);
std::vector<RdpPoint> parse_csv(const std::string& text);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// D-vs-rate, P-vs-rate and P-vs-D cross-sections as SVG files in `dir`.
std::vector<std::filesystem::path> write_plots(const std::vector<RdpPoint>& points,
                                               const std::filesystem::path& dir);

}  // namespace rsc
