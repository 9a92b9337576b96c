#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an OpenMP
// variant; both compute each output element with the same summation order, so
// their results are bit-identical regardless of thread count or schedule.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqcore/grid.hpp"

namespace seqcore::kernels {

struct NearestHit {
  double squared = 0.0;
  std::uint32_t index = 0;
};

/// Squared Euclidean distance, accumulated in double in index order.
inline double squared_distance(const float* a, const float* b, std::size_t dim) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    s += d * d;
  }
  return s;
}

/// Normalized 1D Gaussian taps. For even sizes the center sits halfway between
/// taps size/2-1 and size/2. Output x reads input x + k - size/2.
std::vector<double> gaussian_taps(double sigma, std::size_t size);

namespace serial {

/// For each of the `queries.size()/dim` rows, the nearest of the member rows.
/// Ties resolve to the smallest member index.
void nearest(std::span<const float> queries, std::span<const float> members, std::size_t dim,
             std::span<NearestHit> out);

/// Dense n x n Euclidean distance matrix (float), zero diagonal.
void pairwise(std::span<const float> points, std::size_t dim, std::span<float> out);

/// Separable convolution with symmetric boundary padding.
Image blur(const Image& in, std::span<const double> taps);

}  // namespace serial

namespace omp {

void nearest(std::span<const float> queries, std::span<const float> members, std::size_t dim,
             std::span<NearestHit> out);
void pairwise(std::span<const float> points, std::size_t dim, std::span<float> out);
Image blur(const Image& in, std::span<const double> taps);

/// Threads OpenMP will use for the next parallel region (1 without OpenMP).
int max_threads();

}  // namespace omp

/// Symmetric ("half-sample") reflection of i into [0, n).
inline std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept {
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - 1 - i);
}

}  // namespace seqcore::kernels
