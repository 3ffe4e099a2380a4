#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Core>

namespace dichotomy {

/// SplitMix64 in counter form: the i-th output is mix(seed + (i+1) * 0x9E3779B97F4A7C15).
///
/// Draws are pinned so that other implementations can reproduce a run bit for bit:
///   uniform01   = (word >> 11) * 2^-53                    in [0, 1)
///   uniform(a,b)= a + (b - a) * uniform01
///   gaussian    = sqrt(-2 ln u1) * cos(2 pi u2), u1 = ((word >> 11) + 1) * 2^-53 in (0, 1]
/// Each gaussian consumes two words (u1 first). Matrices are filled column-major.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : seed_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() noexcept {
    ++counter_;
    return mix(seed_ + counter_ * kGamma);
  }

  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

  double gaussian() noexcept {
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

  Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace dichotomy
