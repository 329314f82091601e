#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rsc/sources.hpp"

using namespace rsc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rsc_tests";
  fs::create_directories(dir);
  return dir / name;
}

IdxArray tiny_images() {
  IdxArray a;
  a.magic = kIdxImagesMagic;
  a.dims = {3, 2, 2};
  a.bytes = {0, 255, 128, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  return a;
}

}  // namespace

TEST_SUITE("sources") {

TEST_CASE("IDX round trip, raw and gzip") {
  for (const char* name : {"img.idx", "img.idx.gz"}) {
    const auto path = scratch(name);
    write_idx(path, tiny_images());
    const IdxArray back = read_idx(path, kIdxImagesMagic);
    CHECK(back.dims == tiny_images().dims);
    CHECK(back.bytes == tiny_images().bytes);
  }
}

TEST_CASE("IDX errors") {
  const auto path = scratch("bad.idx");
  write_idx(path, tiny_images());
  CHECK_THROWS_AS(read_idx(path, kIdxLabelsMagic), BadMagic);
  {
    std::ofstream f(scratch("short.idx"), std::ios::binary);
    const unsigned char head[] = {0, 0, 8, 3, 0, 0, 0, 9, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2};
    f.write(reinterpret_cast<const char*>(head), sizeof head);
  }
  CHECK_THROWS_AS(read_idx(scratch("short.idx"), kIdxImagesMagic), TruncatedFile);
}

TEST_CASE("MNIST pixel mapping and label count") {
  write_idx(scratch("i.idx"), tiny_images());
  IdxArray labels;
  labels.magic = kIdxLabelsMagic;
  labels.dims = {3};
  labels.bytes = {7, 1, 4};
  write_idx(scratch("l.idx"), labels);
  const Dataset ds = load_mnist_idx(scratch("i.idx"), scratch("l.idx"));
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 4);
  CHECK(ds.samples[0] == -1.0f);
  CHECK(ds.samples[1] == 1.0f);
  CHECK(ds.samples[2] == doctest::Approx(128 / 127.5 - 1));
  CHECK(ds.labels == std::vector<std::uint8_t>{7, 1, 4});
  labels.dims = {2};
  labels.bytes = {7, 1};
  write_idx(scratch("l2.idx"), labels);
  CHECK_THROWS_AS(load_mnist_idx(scratch("i.idx"), scratch("l2.idx")), CountMismatch);
}

TEST_CASE("Gaussian source moments") {
  const auto spec = GaussianSourceSpec::with_spectrum({4, 1, 0.25}, 3);
  const Dataset ds = sample_gaussian_source(spec, 200000, RngStream(9, 0));
  for (std::size_t a = 0; a < 3; ++a) {
    double m = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) m += ds.samples.at(i, a);
    CHECK(std::abs(m / ds.size()) < 0.02);
    for (std::size_t b = 0; b < 3; ++b) {
      double c = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) c += ds.samples.at(i, a) * ds.samples.at(i, b);
      CHECK(c / ds.size() == doctest::Approx(spec.covariance[a * 3 + b]).epsilon(0.03).scale(4));
    }
  }
}

TEST_CASE("covariance validation") {
  GaussianSourceSpec s = GaussianSourceSpec::isotropic(2);
  s.covariance[0] = -1.0;
  CHECK_THROWS_AS(s.validate(), NonPsdCovariance);
  s = GaussianSourceSpec::isotropic(2);
  s.covariance[1] = 0.5;  // asymmetric
  CHECK_THROWS_AS(s.validate(), NonPsdCovariance);
  CHECK_THROWS_AS(sample_gaussian_source(GaussianSourceSpec::isotropic(2), 0, RngStream()),
                  EmptyDataset);
}

TEST_CASE("batch iterator covers every sample once") {
  const Dataset ds = sample_gaussian_source(GaussianSourceSpec::isotropic(2), 10, RngStream(1, 1));
  BatchIterator it(ds, 4, RngStream(2, 2), true);
  std::size_t rows = 0, batches = 0;
  while (auto b = it.next()) {
    rows += b->rows();
    ++batches;
  }
  CHECK(rows == 10);
  CHECK(batches == 3);
  auto order = it.order();
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(order[i] == i);
  CHECK_THROWS_AS(BatchIterator(ds, 0, RngStream(), false), InvalidRange);
}

}
