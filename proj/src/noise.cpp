#include "seqcore/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqcore/error.hpp"
#include "seqcore/random.hpp"

namespace seqcore {

double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

namespace {

// Eight unit gradients at 45 degree steps.
constexpr double kDiag = 0.70710678118654752440;
constexpr double kGradX[8] = {1.0, kDiag, 0.0, -kDiag, -1.0, -kDiag, 0.0, kDiag};
constexpr double kGradY[8] = {0.0, kDiag, 1.0, kDiag, 0.0, -kDiag, -1.0, -kDiag};

// With unit gradients the 2D extremum is sqrt(2)/2; rescale to fill [-1, 1].
constexpr double kRangeScale = 1.41421356237309504880;

inline double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

inline double corner(std::uint64_t seed, std::int64_t ix, std::int64_t iy, double dx, double dy) {
  const auto g = static_cast<unsigned>(hash_cell(seed, ix, iy) >> 61);
  return kGradX[g] * dx + kGradY[g] * dy;
}

}  // namespace

double perlin(Vec2 p, double frequency, NoiseSeed seed) {
  const double x = p.x * frequency;
  const double y = p.y * frequency;
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double dx = x - fx;
  const double dy = y - fy;

  const double n00 = corner(seed.value, ix, iy, dx, dy);
  const double n10 = corner(seed.value, ix + 1, iy, dx - 1.0, dy);
  const double n01 = corner(seed.value, ix, iy + 1, dx, dy - 1.0);
  const double n11 = corner(seed.value, ix + 1, iy + 1, dx - 1.0, dy - 1.0);

  const double u = fade(dx);
  const double v = fade(dy);
  const double nx0 = n00 + u * (n10 - n00);
  const double nx1 = n01 + u * (n11 - n01);
  return std::clamp((nx0 + v * (nx1 - nx0)) * kRangeScale, -1.0, 1.0);
}

GridSampling::GridSampling(double cell_size, Rect region, NoiseSeed seed)
    : cell_size_(cell_size), region_(region), seed_(seed) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size))
    throw ConfigError("grid cell size must be positive, got " + std::to_string(cell_size));
  if (!(region.x1 > region.x0) || !(region.y1 > region.y0))
    throw ConfigError("sampling region is degenerate");
  ix_begin_ = static_cast<std::int64_t>(std::floor(region.x0 / cell_size));
  iy_begin_ = static_cast<std::int64_t>(std::floor(region.y0 / cell_size));
  ix_end_ = static_cast<std::int64_t>(std::ceil(region.x1 / cell_size));
  iy_end_ = static_cast<std::int64_t>(std::ceil(region.y1 / cell_size));
}

CellIndex GridSampling::cell_of(Vec2 p) const {
  return {static_cast<std::int64_t>(std::floor(p.x / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.y / cell_size_))};
}

bool GridSampling::has_cell(CellIndex c) const {
  return c.ix >= ix_begin_ && c.ix < ix_end_ && c.iy >= iy_begin_ && c.iy < iy_end_;
}

Vec2 GridSampling::center(CellIndex c) const {
  const std::uint64_t h = hash_cell(seed_.value, c.ix, c.iy);
  const double u = open_unit_interval(h);
  const double v = open_unit_interval(mix64(h));
  return {(static_cast<double>(c.ix) + u) * cell_size_, (static_cast<double>(c.iy) + v) * cell_size_};
}

std::vector<CellCenter> GridSampling::jitter_centers() const {
  std::vector<CellCenter> out;
  out.reserve(static_cast<std::size_t>((ix_end_ - ix_begin_) * (iy_end_ - iy_begin_)));
  for (std::int64_t iy = iy_begin_; iy < iy_end_; ++iy)
    for (std::int64_t ix = ix_begin_; ix < ix_end_; ++ix) out.push_back({{ix, iy}, center({ix, iy})});
  return out;
}

std::optional<NearestCenter> nearest_center(Vec2 p, const GridSampling& sampling, double reach) {
  if (reach > sampling.cell_size())
    throw ConfigError("stain reach r + A = " + std::to_string(reach) + " exceeds grid cell size G = " +
                      std::to_string(sampling.cell_size()));
  const CellIndex home = sampling.cell_of(p);
  std::optional<NearestCenter> best;
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::int64_t dy = -1; dy <= 1; ++dy) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      const CellIndex c{home.ix + dx, home.iy + dy};
      if (!sampling.has_cell(c)) continue;
      const Vec2 center = sampling.center(c);
      const Vec2 d = p - center;
      const double sq = d.x * d.x + d.y * d.y;
      if (sq < best_sq) {
        best_sq = sq;
        best = NearestCenter{center, 0.0};
      }
    }
  }
  if (best) best->distance = std::sqrt(best_sq);
  return best;
}

}  // namespace seqcore
