#include "adaptfeat/data_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "adaptfeat/csv.hpp"
#include "adaptfeat/rng.hpp"

namespace adaptfeat {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw IdxTruncatedError("IDX header truncated: " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 bool normalize) {
  const std::vector<std::uint8_t> img = read_bytes(images);
  const std::vector<std::uint8_t> lbl = read_bytes(labels);
  if (read_be32(img, 0, images) != kIdxImageMagic) {
    throw IdxFormatError("bad IDX image magic in " + images.string());
  }
  if (read_be32(lbl, 0, labels) != kIdxLabelMagic) {
    throw IdxFormatError("bad IDX label magic in " + labels.string());
  }
  const std::uint32_t count = read_be32(img, 4, images);
  const std::uint32_t rows = read_be32(img, 8, images);
  const std::uint32_t cols = read_be32(img, 12, images);
  const std::uint32_t label_count = read_be32(lbl, 4, labels);
  const std::size_t dim = std::size_t{rows} * cols;
  if (img.size() < 16 + std::size_t{count} * dim) throw IdxTruncatedError("IDX image payload truncated");
  if (lbl.size() < 8 + std::size_t{label_count}) throw IdxTruncatedError("IDX label payload truncated");
  if (count != label_count) {
    throw IdxCountMismatchError("IDX image count " + std::to_string(count) + " != label count " +
                                std::to_string(label_count));
  }
  Dataset ds;
  ds.source = "idx:" + images.string();
  ds.x.resize(count, static_cast<Index>(dim));
  ds.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) ds.x(i, static_cast<Index>(j)) = img[16 + i * dim + j] / 255.0;
    ds.labels[i] = lbl[8 + i];
  }
  if (normalize) {
    ds.x = normalize_rows(ds.x);
    ds.normalized = true;
  }
  return ds;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols) throw ShapeError("write_idx_images: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  put_be32(out, kIdxImageMagic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Matrix normalize_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const auto centered = x.row(i).array() - mean;
    const double var = centered.square().mean();
    if (!(var > 0.0)) throw DomainError("normalize_rows: row " + std::to_string(i) + " is constant");
    out.row(i) = centered / std::sqrt(var);
  }
  return out;
}

BinaryDataset filter_classes(const Dataset& ds, int class_a, int class_b, Index n,
                             std::uint64_t seed) {
  if (class_a == class_b) throw DomainError("filter_classes: classes must differ");
  std::vector<Index> candidates;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] == class_a || ds.labels[i] == class_b) candidates.push_back(static_cast<Index>(i));
  }
  if (n <= 0 || static_cast<Index>(candidates.size()) < n) {
    throw DomainError("filter_classes: only " + std::to_string(candidates.size()) +
                      " samples available, requested " + std::to_string(n));
  }
  CounterRng rng(seed, 4);
  rng.shuffle(candidates);
  BinaryDataset out;
  out.data.source = ds.source;
  out.data.normalized = ds.normalized;
  out.data.x.resize(n, ds.x.cols());
  out.data.labels.resize(static_cast<std::size_t>(n));
  out.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index src = candidates[static_cast<std::size_t>(i)];
    out.data.x.row(i) = ds.x.row(src);
    out.data.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
    out.labels(i) = ds.labels[static_cast<std::size_t>(src)] == class_a ? -1.0 : 1.0;
  }
  if (!(out.labels.array() < 0.0).any() || !(out.labels.array() > 0.0).any()) {
    throw DomainError("filter_classes: selection contains a single class");
  }
  return out;
}

BinaryDataset synthetic_clusters(Index n, Index d, double separation, std::uint64_t seed) {
  if (n <= 0 || n % 2 != 0) throw DomainError("synthetic_clusters: n must be positive and even");
  if (d < 2) throw DomainError("synthetic_clusters: d must be at least 2");
  CounterRng rng(seed, 5);
  Vector u = rng.normal_vector(d);
  u /= u.norm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  BinaryDataset out;
  out.data.source = "synthetic";
  out.data.x.resize(n, d);
  out.data.labels.resize(static_cast<std::size_t>(n));
  out.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index row = order[static_cast<std::size_t>(i)];
    const int cls = i < n / 2 ? 0 : 1;
    const double side = cls == 0 ? -1.0 : 1.0;
    out.data.x.row(row) = (rng.normal_vector(d) + side * 0.5 * separation * u).transpose();
    out.data.labels[static_cast<std::size_t>(row)] = cls;
    out.labels(row) = side;
  }
  out.data.x = normalize_rows(out.data.x);
  out.data.normalized = true;
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  checkpoint.spec.validate();
  if (checkpoint.theta.size() != checkpoint.spec.param_count()) {
    throw ShapeError("save_checkpoint: parameter length does not match the spec");
  }
  nlohmann::json header;
  header["layer_widths"] = checkpoint.spec.layer_widths;
  header["seed"] = checkpoint.seed;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "# " << header.dump() << '\n';
  csv::write_matrix(out, Matrix(checkpoint.theta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("# ", 0) != 0) throw Error("checkpoint: missing header line");
  Checkpoint cp;
  try {
    const nlohmann::json header = nlohmann::json::parse(line.substr(2));
    cp.spec.layer_widths = header.at("layer_widths").get<std::vector<Index>>();
    cp.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: bad header: ") + e.what());
  }
  const Matrix theta = csv::read_matrix(in);
  if (theta.cols() != 1 || theta.rows() != cp.spec.param_count()) {
    throw ShapeError("checkpoint: parameter count does not match layer widths");
  }
  cp.theta = theta.col(0);
  return cp;
}

std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("ADAPT_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return ".adapt_cache";
}

}  // namespace adaptfeat
