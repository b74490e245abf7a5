#pragma once

#include <cstdint>
#include <vector>

#include "adaptfeat/numerics.hpp"

namespace adaptfeat {

/// Counter-based generator: the i-th draw is a pure function of
/// (seed, stream, i), so streams can be split deterministically for parallel
/// or reordered consumers. All derived distributions are implemented here
/// (not via <random>) so output is bitwise identical across standard
/// libraries.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  Matrix normal_matrix(Index rows, Index cols, double stddev = 1.0);
  Vector normal_vector(Index size, double stddev = 1.0);
  /// Haar-distributed orthogonal matrix.
  Matrix orthogonal(Index n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Independent generator for sub-stream `stream` of this generator's seed.
  CounterRng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace adaptfeat
