#include "rsc/sources.hpp"

#include <zlib.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace rsc {
namespace {

struct GzCloser {
  void operator()(gzFile_s* f) const {
    if (f) gzclose(f);
  }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

GzHandle open_gz(const std::filesystem::path& path, const char* mode) {
  GzHandle f(gzopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// Reads exactly n bytes or reports how many arrived.
std::size_t read_fully(gzFile_s* f, void* dst, std::size_t n) {
  auto* out = static_cast<unsigned char*>(dst);
  std::size_t got = 0;
  while (got < n) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - got, 1u << 30));
    const int r = gzread(f, out + got, chunk);
    if (r <= 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

Eigen::MatrixXd to_eigen(const Tensor64& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t.at(i, j);
  return m;
}

}  // namespace

std::string to_string(SourceKind kind) {
  return kind == SourceKind::kMnist ? "mnist" : "gaussian";
}

SourceKind parse_source_kind(const std::string& name) {
  if (name == "mnist") return SourceKind::kMnist;
  if (name == "gaussian") return SourceKind::kGaussian;
  throw ConfigError("unknown data.kind '" + name + "' (mnist|gaussian)");
}

Tensor Dataset::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t d = dim();
  Tensor out({indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = samples.row(indices[r]);
    std::copy(src.begin(), src.end(), out.data() + r * d);
  }
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Dataset out{gather(idx), {}, kind, split};
  if (!labels.empty()) out.labels.assign(labels.begin(), labels.begin() + n);
  return out;
}

IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic) {
  auto f = open_gz(path, "rb");
  unsigned char head[4];
  if (read_fully(f.get(), head, 4) != 4) throw TruncatedFile(path.string() + ": no header");
  IdxArray arr;
  arr.magic = be32(head);
  if (arr.magic != expected_magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "0x%08X, expected 0x%08X", arr.magic, expected_magic);
    throw BadMagic(path.string() + ": magic " + buf);
  }
  const std::size_t ndims = arr.magic & 0xFF;
  std::size_t total = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    unsigned char b[4];
    if (read_fully(f.get(), b, 4) != 4) throw TruncatedFile(path.string() + ": short header");
    arr.dims.push_back(be32(b));
    total *= arr.dims.back();
  }
  arr.bytes.resize(total);
  const std::size_t got = read_fully(f.get(), arr.bytes.data(), total);
  if (got != total) {
    throw TruncatedFile(path.string() + ": expected " + std::to_string(total) +
                        " data bytes, found " + std::to_string(got));
  }
  return arr;
}

void write_idx(const std::filesystem::path& path, const IdxArray& arr) {
  std::vector<unsigned char> buf;
  put_be32(buf, arr.magic);
  for (auto d : arr.dims) put_be32(buf, d);
  buf.insert(buf.end(), arr.bytes.begin(), arr.bytes.end());
  const bool gz = path.extension() == ".gz";
  auto f = open_gz(path, gz ? "wb9" : "wbT");
  if (gzwrite(f.get(), buf.data(), static_cast<unsigned>(buf.size())) !=
      static_cast<int>(buf.size())) {
    throw IoError("short write to " + path.string());
  }
}

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, Split split) {
  const IdxArray img = read_idx(images_path, kIdxImagesMagic);
  if (img.dims.size() != 3 || img.dims[0] == 0) {
    throw CountMismatch(images_path.string() + ": expected N×rows×cols with N > 0");
  }
  const std::size_t n = img.dims[0];
  const std::size_t d = std::size_t{img.dims[1]} * img.dims[2];
  Dataset ds;
  ds.kind = SourceKind::kMnist;
  ds.split = split;
  ds.samples = Tensor({n, d});
  for (std::size_t i = 0; i < n * d; ++i) {
    ds.samples[i] = static_cast<float>(img.bytes[i] / 127.5 - 1.0);
  }
  if (!labels_path.empty()) {
    IdxArray lab = read_idx(labels_path, kIdxLabelsMagic);
    if (lab.dims.size() != 1 || lab.dims[0] != n) {
      throw CountMismatch("labels hold " + std::to_string(lab.dims.empty() ? 0 : lab.dims[0]) +
                          " entries for " + std::to_string(n) + " images");
    }
    ds.labels = std::move(lab.bytes);
  }
  return ds;
}

void GaussianSourceSpec::validate() const {
  if (dim == 0 || mean.size() != dim || covariance.rank() != 2 ||
      covariance.dim(0) != dim || covariance.dim(1) != dim) {
    throw ShapeMismatch("gaussian source: mean/covariance do not match dim " +
                        std::to_string(dim));
  }
  const Eigen::MatrixXd c = to_eigen(covariance);
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if (!c.allFinite() || (c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NonPsdCovariance("covariance is not symmetric");
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
  if (ldlt.info() != Eigen::Success ||
      ldlt.vectorD().minCoeff() < -1e-10 * scale) {
    throw NonPsdCovariance("covariance has a negative pivot");
  }
}

GaussianSourceSpec GaussianSourceSpec::isotropic(std::size_t dim, double variance) {
  GaussianSourceSpec s;
  s.dim = dim;
  s.mean = Tensor64({dim});
  s.covariance = Tensor64({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) s.covariance.at(i, i) = variance;
  return s;
}

GaussianSourceSpec GaussianSourceSpec::with_spectrum(const std::vector<double>& spectrum,
                                                     std::uint64_t seed) {
  const std::size_t n = spectrum.size();
  RngStream rng(seed, 0x5eedc0f);
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.next_gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lam(n);
  for (std::size_t i = 0; i < n; ++i) lam(i) = spectrum[i];
  Eigen::MatrixXd c = q * lam.asDiagonal() * q.transpose();
  c = 0.5 * (c + c.transpose());
  GaussianSourceSpec s;
  s.dim = n;
  s.mean = Tensor64({n});
  s.covariance = Tensor64({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s.covariance.at(i, j) = c(i, j);
  return s;
}

Dataset sample_gaussian_source(const GaussianSourceSpec& spec, std::size_t n, RngStream rng) {
  spec.validate();
  if (n == 0) throw EmptyDataset("requested zero gaussian samples");
  const std::size_t d = spec.dim;
  // Σ = V Λ Vᵀ ⇒ x = μ + V Λ^½ z. Tolerates singular Σ, unlike Cholesky.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_eigen(spec.covariance));
  const Eigen::MatrixXd factor =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Dataset ds;
  ds.kind = SourceKind::kGaussian;
  ds.samples = Tensor({n, d});
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z(j) = rng.next_gaussian();
    const Eigen::VectorXd x = factor * z;
    for (std::size_t j = 0; j < d; ++j) {
      ds.samples[i * d + j] = static_cast<float>(spec.mean[j] + x(j));
    }
  }
  return ds;
}

std::vector<std::size_t> permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.next_below(i)]);
  return p;
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, RngStream rng,
                             bool shuffle)
    : ds_(&ds), batch_size_(batch_size) {
  if (ds.size() == 0) throw EmptyDataset("cannot batch an empty dataset");
  if (batch_size == 0 || batch_size > ds.size()) {
    throw InvalidRange("batch size " + std::to_string(batch_size) + " outside 1.." +
                       std::to_string(ds.size()));
  }
  if (shuffle) {
    order_ = permutation(ds.size(), rng);
  } else {
    order_.resize(ds.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  }
}

std::optional<Tensor> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> idx(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return ds_->gather(idx);
}

}  // namespace rsc
