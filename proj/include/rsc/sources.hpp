#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsc/numerics/rng.hpp"
#include "rsc/numerics/tensor.hpp"

namespace rsc {

enum class SourceKind { kMnist, kGaussian };
enum class Split { kTrain, kTest };

std::string to_string(SourceKind kind);
SourceKind parse_source_kind(const std::string& name);

// N samples of dimension d, one per row. MNIST pixels live in [-1, 1];
// Gaussian samples are unbounded.
struct Dataset {
  Tensor samples;                    // [N × d]
  std::vector<std::uint8_t> labels;  // empty for synthetic sources
  SourceKind kind = SourceKind::kMnist;
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return samples.rows(); }
  std::size_t dim() const noexcept { return samples.cols(); }

  // Rows `indices` stacked into a new [len × d] tensor.
  Tensor gather(const std::vector<std::size_t>& indices) const;
  // First n samples as a new dataset (n clamps to size()).
  Dataset head(std::size_t n) const;
};

// ---- IDX files --------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Raw IDX payload: big-endian header, unsigned byte body. Reads gzip or
// uncompressed files transparently.
struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic);
// Writes raw (uncompressed) IDX unless the path ends in ".gz".
void write_idx(const std::filesystem::path& path, const IdxArray& array);

// Loads an image/label IDX pair; pixels map 0..255 → [-1, 1] as p/127.5 - 1.
// An empty labels path skips labels.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, Split split = Split::kTrain);

// ---- synthetic Gaussian source ---------------------------------------------

struct GaussianSourceSpec {
  std::size_t dim = 0;
  Tensor64 mean;        // [dim]
  Tensor64 covariance;  // [dim × dim], symmetric PSD

  // NonPsdCovariance if not symmetric or any eigenvalue is negative beyond
  // round-off.
  void validate() const;

  static GaussianSourceSpec isotropic(std::size_t dim, double variance = 1.0);
  // Zero mean, eigenvalues `spectrum` rotated by a seeded random orthogonal
  // basis.
  static GaussianSourceSpec with_spectrum(const std::vector<double>& spectrum,
                                          std::uint64_t seed);
};

Dataset sample_gaussian_source(const GaussianSourceSpec& spec, std::size_t n, RngStream rng);

// ---- batching ---------------------------------------------------------------

// One pass over a dataset in batches of `batch_size`; the last batch may be
// short. With shuffle on, the permutation is drawn from `rng` up front.
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, std::size_t batch_size, RngStream rng, bool shuffle);

  std::optional<Tensor> next();
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t batches() const noexcept {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, RngStream& rng);

}  // namespace rsc
