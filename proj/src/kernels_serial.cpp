#include <cmath>
#include <limits>
#include <stdexcept>

#include "seqcore/kernels.hpp"

namespace seqcore::kernels {

std::vector<double> gaussian_taps(double sigma, std::size_t size) {
  if (!(sigma > 0.0) || size == 0) throw std::invalid_argument("gaussian_taps: sigma > 0 and size >= 1 required");
  std::vector<double> taps(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const double o = static_cast<double>(k) - center;
    taps[k] = std::exp(-(o * o) / (2.0 * sigma * sigma));
    total += taps[k];
  }
  for (double& t : taps) t /= total;
  return taps;
}

namespace serial {

void nearest(std::span<const float> queries, std::span<const float> members, std::size_t dim,
             std::span<NearestHit> out) {
  const std::size_t nq = queries.size() / dim;
  const std::size_t nm = members.size() / dim;
  for (std::size_t q = 0; q < nq; ++q) {
    NearestHit best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t m = 0; m < nm; ++m) {
      const double s = squared_distance(queries.data() + q * dim, members.data() + m * dim, dim);
      if (s < best.squared) best = {s, static_cast<std::uint32_t>(m)};
    }
    out[q] = best;
  }
}

void pairwise(std::span<const float> points, std::size_t dim, std::span<float> out) {
  const std::size_t n = points.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 0.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto d = static_cast<float>(std::sqrt(squared_distance(points.data() + i * dim, points.data() + j * dim, dim)));
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
}

Image blur(const Image& in, std::span<const double> taps) {
  const auto h = static_cast<std::ptrdiff_t>(in.height());
  const auto w = static_cast<std::ptrdiff_t>(in.width());
  const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
  Grid<double> tmp(in.height(), in.width());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k)
        s += taps[k] * in(y, reflect_index(x + static_cast<std::ptrdiff_t>(k) - half, w));
      tmp(y, x) = s;
    }
  }
  Image out(in.height(), in.width());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k)
        s += taps[k] * tmp(reflect_index(y + static_cast<std::ptrdiff_t>(k) - half, h), x);
      out(y, x) = static_cast<float>(s);
    }
  }
  return out;
}

}  // namespace serial
}  // namespace seqcore::kernels
