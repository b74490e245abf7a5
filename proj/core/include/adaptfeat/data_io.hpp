#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaptfeat/mlp.hpp"
#include "adaptfeat/numerics.hpp"

namespace adaptfeat {

struct Dataset {
  Matrix x;                 // N x D
  std::vector<int> labels;  // length N
  std::string source;
  /// Rows standardized to zero mean and unit (population) variance.
  bool normalized = false;
};

/// Labeled subset with classes mapped to ±1.
struct BinaryDataset {
  Dataset data;
  Vector labels;
};

class IdxFormatError : public Error {
 public:
  using Error::Error;
};
class IdxTruncatedError : public Error {
 public:
  using Error::Error;
};
class IdxCountMismatchError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image/label pair. Pixels are scaled to [0, 1] and, when
/// `normalize` is set, each row is then standardized.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 bool normalize = true);

void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// Per-row zero mean, unit variance. Throws DomainError on a constant row.
Matrix normalize_rows(const Matrix& x);

/// Seeded shuffle of the samples in classes {a, b}, keep the first n;
/// a → −1, b → +1. Throws DomainError when fewer than n samples exist or a
/// class is missing from the selection.
BinaryDataset filter_classes(const Dataset& ds, int class_a, int class_b, Index n,
                             std::uint64_t seed);

/// Two unit-variance Gaussian clusters centred at ±(separation / 2) u for a
/// random unit vector u, n/2 samples each (labels 0 → −1, 1 → +1), rows
/// standardized, sample order shuffled.
BinaryDataset synthetic_clusters(Index n, Index d, double separation, std::uint64_t seed);

struct Checkpoint {
  MlpSpec spec;
  std::uint64_t seed = 0;
  ParamVector theta;
};

/// "# {"layer_widths":[...],"seed":N}" header line followed by θ as a
/// one-column CSV.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// $ADAPT_CACHE_DIR if set, otherwise ".adapt_cache" in the working directory.
std::filesystem::path cache_dir();

}  // namespace adaptfeat
