#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "adaptfeat/data_io.hpp"
#include "adaptfeat/rng.hpp"

using namespace adaptfeat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "adaptfeat_data_io_test";
  fs::create_directories(dir);
  return dir / name;
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

// Raw IDX writer kept independent of the library.
void raw_images(const fs::path& p, std::uint32_t magic, std::uint32_t count, std::uint32_t r, std::uint32_t c,
                const std::vector<std::uint8_t>& pixels) {
  std::ofstream out(p, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, r);
  put_be32(out, c);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void raw_labels(const fs::path& p, std::uint32_t count, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(p, std::ios::binary);
  put_be32(out, 0x801);
  put_be32(out, count);
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace

TEST_CASE("IDX round trip of raw bytes") {
  const std::vector<std::uint8_t> pixels = {0, 255, 17, 34, 51, 68, 85, 102, 119, 136, 153, 170};
  raw_images(scratch("a.img"), 0x803, 3, 2, 2, pixels);
  raw_labels(scratch("a.lbl"), 3, {7, 1, 9});
  const Dataset ds = load_idx(scratch("a.img"), scratch("a.lbl"), false);
  REQUIRE(ds.x.rows() == 3);
  REQUIRE(ds.x.cols() == 4);
  for (Index i = 0; i < 3; ++i)
    for (Index k = 0; k < 4; ++k) CHECK(ds.x(i, k) == doctest::Approx(pixels[static_cast<std::size_t>(4 * i + k)] / 255.0));
  CHECK(ds.labels == std::vector<int>{7, 1, 9});
  CHECK(!ds.normalized);

  write_idx_images(scratch("b.img"), pixels, 3, 2, 2);
  write_idx_labels(scratch("b.lbl"), {7, 1, 9});
  std::ifstream a(scratch("a.img"), std::ios::binary), b(scratch("b.img"), std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

  const Dataset norm = load_idx(scratch("a.img"), scratch("a.lbl"));
  CHECK(norm.normalized);
  for (Index i = 0; i < 3; ++i) {
    CHECK(std::abs(norm.x.row(i).mean()) < 1e-12);
    CHECK(norm.x.row(i).squaredNorm() / 4.0 == doctest::Approx(1.0));
  }
}

TEST_CASE("IDX error cases") {
  const std::vector<std::uint8_t> pixels(8, 3);
  raw_images(scratch("bad.img"), 0x802, 2, 2, 2, pixels);
  raw_labels(scratch("ok.lbl"), 2, {0, 1});
  CHECK_THROWS_AS(load_idx(scratch("bad.img"), scratch("ok.lbl"), false), IdxFormatError);

  raw_images(scratch("ok.img"), 0x803, 2, 2, 2, pixels);
  raw_labels(scratch("three.lbl"), 3, {0, 1, 2});
  CHECK_THROWS_AS(load_idx(scratch("ok.img"), scratch("three.lbl"), false), IdxCountMismatchError);

  raw_images(scratch("short.img"), 0x803, 2, 2, 2, std::vector<std::uint8_t>(5, 1));
  CHECK_THROWS_AS(load_idx(scratch("short.img"), scratch("ok.lbl"), false), IdxTruncatedError);
  CHECK_THROWS(load_idx(scratch("missing.img"), scratch("ok.lbl")));
}

TEST_CASE("row normalization") {
  CounterRng rng(80);
  const Matrix x = 3.0 * rng.normal_matrix(5, 9).array() + 2.0;
  const Matrix n = normalize_rows(x);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(n.row(i).mean()) < 1e-12);
    CHECK(n.row(i).squaredNorm() / 9.0 == doctest::Approx(1.0));
  }
  CHECK((normalize_rows(n) - n).norm() < 1e-12);
  Matrix c = x;
  c.row(2).setConstant(4.0);
  CHECK_THROWS_AS(normalize_rows(c), DomainError);
}

TEST_CASE("class filtering") {
  Dataset ds;
  ds.x = Matrix(10, 2);
  for (Index i = 0; i < 10; ++i) ds.x.row(i) << static_cast<double>(i), -static_cast<double>(i);
  ds.labels = {0, 1, 2, 3, 2, 3, 2, 3, 5, 2};
  const BinaryDataset a = filter_classes(ds, 2, 3, 5, 4);
  const BinaryDataset b = filter_classes(ds, 2, 3, 5, 4);
  CHECK(a.data.x == b.data.x);
  REQUIRE(a.labels.size() == 5);
  for (Index i = 0; i < 5; ++i) {
    const int original = ds.labels[static_cast<std::size_t>(a.data.x(i, 0))];
    CHECK(a.labels(i) == (original == 2 ? -1.0 : 1.0));
  }
  CHECK_THROWS_AS(filter_classes(ds, 2, 3, 8, 4), DomainError);
}

TEST_CASE("synthetic clusters are separable at large separation") {
  const BinaryDataset ds = synthetic_clusters(200, 20, 10.0, 6);
  CHECK(ds.data.x.rows() == 200);
  CHECK((ds.labels.array() > 0).count() == 100);
  // Nearest class mean.
  Vector mp = Vector::Zero(20), mn = Vector::Zero(20);
  for (Index i = 0; i < 200; ++i) (ds.labels(i) > 0 ? mp : mn) += ds.data.x.row(i).transpose() / 100.0;
  int correct = 0;
  for (Index i = 0; i < 200; ++i) {
    const Vector x = ds.data.x.row(i).transpose();
    const double s = (x - mn).squaredNorm() - (x - mp).squaredNorm();
    correct += (s > 0) == (ds.labels(i) > 0);
  }
  CHECK(correct >= 198);
  CHECK(synthetic_clusters(200, 20, 10.0, 6).data.x == ds.data.x);
  CHECK_THROWS(synthetic_clusters(9, 20, 1.0, 0));
  CHECK_THROWS(synthetic_clusters(10, 1, 1.0, 0));
}

TEST_CASE("checkpoint round trip") {
  CounterRng rng(81);
  Checkpoint ck{MlpSpec{{3, 4, 2}}, 42, {}};
  ck.theta = init_params(ck.spec, rng);
  save_checkpoint(scratch("c.ckpt"), ck);
  const Checkpoint back = load_checkpoint(scratch("c.ckpt"));
  CHECK(back.spec.layer_widths == ck.spec.layer_widths);
  CHECK(back.seed == 42);
  CHECK(back.theta == ck.theta);
}

TEST_CASE("cache directory") {
  setenv("ADAPT_CACHE_DIR", "/tmp/somewhere", 1);
  CHECK(cache_dir() == fs::path("/tmp/somewhere"));
  unsetenv("ADAPT_CACHE_DIR");
  CHECK(cache_dir() == fs::path(".adapt_cache"));
}
