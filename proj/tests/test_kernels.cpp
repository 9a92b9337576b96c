#include "doctest.h"
#include "seqcore/kernels.hpp"
#include "support.hpp"

using namespace seqcore;

TEST_CASE("reflect_index mirrors with the edge sample repeated") {
  CHECK(kernels::reflect_index(-1, 5) == 0);
  CHECK(kernels::reflect_index(-2, 5) == 1);
  CHECK(kernels::reflect_index(5, 5) == 4);
  CHECK(kernels::reflect_index(6, 5) == 3);
  CHECK(kernels::reflect_index(3, 5) == 3);
  CHECK(kernels::reflect_index(-11, 5) == 0);
  CHECK(kernels::reflect_index(-3, 1) == 0);
}

TEST_CASE("nearest: serial and OpenMP agree bit for bit") {
  for (std::size_t dim : {1, 3, 12}) {
    const auto members = testing::random_points(57, dim, dim);
    const auto queries = testing::random_points(301, dim, dim + 100);
    std::vector<kernels::NearestHit> a(301), b(301);
    kernels::serial::nearest(queries, members, dim, a);
    kernels::omp::nearest(queries, members, dim, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].squared == b[i].squared);
      CHECK(a[i].index == b[i].index);
    }
  }
}

TEST_CASE("nearest resolves ties to the lowest member index") {
  const std::vector<float> members{1, 0, -1, 0, 1, 0};
  const std::vector<float> q{0, 0};
  kernels::NearestHit hit;
  kernels::serial::nearest(q, members, 2, {&hit, 1});
  CHECK(hit.index == 0);
  CHECK(hit.squared == 1.0);
  kernels::omp::nearest(q, members, 2, {&hit, 1});
  CHECK(hit.index == 0);
}

TEST_CASE("pairwise: serial and OpenMP agree and are symmetric") {
  const auto pts = testing::random_points(64, 6, 3);
  std::vector<float> a(64 * 64), b(64 * 64);
  kernels::serial::pairwise(pts, 6, a);
  kernels::omp::pairwise(pts, 6, b);
  CHECK(a == b);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(a[i * 64 + i] == 0.0f);
    for (std::size_t j = 0; j < 64; ++j) CHECK(a[i * 64 + j] == a[j * 64 + i]);
  }
}

TEST_CASE("blur: serial and OpenMP agree bit for bit") {
  Image img(37, 53);
  const auto v = testing::random_points(37 * 53, 1, 4);
  img.values() = v;
  for (std::size_t size : {1, 4, 9, 16}) {
    const auto taps = kernels::gaussian_taps(2.0, size);
    CHECK(kernels::serial::blur(img, taps) == kernels::omp::blur(img, taps));
  }
}

TEST_CASE("blur with a one-tap kernel is the identity") {
  Image img(5, 7);
  img.values() = testing::random_points(35, 1, 5);
  const std::vector<double> taps{1.0};
  CHECK(kernels::serial::blur(img, taps) == img);
}
