#pragma once

#include <filesystem>
#include <string>

#include "rsc/sources.hpp"
#include "rsc/training.hpp"

namespace rsc::testing {

inline std::filesystem::path scratch_dir(const std::string& sub) {
  const auto dir = std::filesystem::temp_directory_path() / "rsc_tests" / sub;
  std::filesystem::create_directories(dir);
  return dir;
}

// A codec small enough to train in well under a second.
inline TrainConfig tiny_config(Scheme scheme = Scheme::kRsc, std::size_t dim = 6,
                               std::size_t K = 4) {
  TrainConfig c;
  c.scheme = scheme;
  c.codec.input_dim = dim;
  c.codec.latent_dim = K;
  c.codec.encoder_hidden = {16};
  c.codec.decoder_hidden = {16};
  c.critic.input_dim = dim;
  c.critic.hidden = {16};
  c.batch = 16;
  c.epochs = 2;
  c.critic_warmup = 5;
  c.n_critic = 2;
  c.seed = 11;
  return c;
}

inline Dataset tiny_data(std::size_t dim = 6, std::size_t n = 96) {
  return sample_gaussian_source(GaussianSourceSpec::isotropic(dim, 0.2), n, RngStream(5, 1));
}

}  // namespace rsc::testing
