#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "seqcore/kernels.hpp"

namespace seqcore::kernels::omp {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void nearest(std::span<const float> queries, std::span<const float> members, std::size_t dim,
             std::span<NearestHit> out) {
  const auto nq = static_cast<std::ptrdiff_t>(queries.size() / dim);
  const std::size_t nm = members.size() / dim;
  const float* qp = queries.data();
  const float* mp = members.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < nq; ++q) {
    NearestHit best{std::numeric_limits<double>::infinity(), 0};
    const float* row = qp + static_cast<std::size_t>(q) * dim;
    for (std::size_t m = 0; m < nm; ++m) {
      const double s = squared_distance(row, mp + m * dim, dim);
      if (s < best.squared) best = {s, static_cast<std::uint32_t>(m)};
    }
    out[static_cast<std::size_t>(q)] = best;
  }
}

void pairwise(std::span<const float> points, std::size_t dim, std::span<float> out) {
  const auto n = static_cast<std::ptrdiff_t>(points.size() / dim);
  const float* p = points.data();
  float* d = out.data();
  const auto un = static_cast<std::size_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    d[ui * un + ui] = 0.0f;
    for (std::size_t j = ui + 1; j < un; ++j)
      d[ui * un + j] = static_cast<float>(std::sqrt(squared_distance(p + ui * dim, p + j * dim, dim)));
  }
  // Mirror once the upper triangle is complete.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 1; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < ui; ++j) d[ui * un + j] = d[j * un + ui];
  }
}

Image blur(const Image& in, std::span<const double> taps) {
  const auto h = static_cast<std::ptrdiff_t>(in.height());
  const auto w = static_cast<std::ptrdiff_t>(in.width());
  const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const std::size_t nt = taps.size();
  Grid<double> tmp(in.height(), in.width());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < nt; ++k)
        s += taps[k] * in(y, reflect_index(x + static_cast<std::ptrdiff_t>(k) - half, w));
      tmp(y, x) = s;
    }
  }
  Image out(in.height(), in.width());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < nt; ++k)
        s += taps[k] * tmp(reflect_index(y + static_cast<std::ptrdiff_t>(k) - half, h), x);
      out(y, x) = static_cast<float>(s);
    }
  }
  return out;
}

}  // namespace seqcore::kernels::omp
