#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace seqcore {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(Vec2, Vec2) = default;
};

double norm(Vec2 v);

struct NoiseSeed {
  std::uint64_t value = 0;
  friend bool operator==(NoiseSeed, NoiseSeed) = default;
};

/// Improved (quintic fade) gradient noise at p*frequency, scaled to [-1, 1].
/// Lattice points map to exactly 0.
double perlin(Vec2 p, double frequency, NoiseSeed seed);

/// Analytic bound on |grad perlin| per unit of frequency (unit gradients, quintic
/// fade slope 15/8, range rescale sqrt 2), used by continuity checks.
inline constexpr double kPerlinLipschitz = 13.0;

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // half-open [x0,x1) x [y0,y1)
};

struct CellIndex {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  friend bool operator==(CellIndex, CellIndex) = default;
};

struct CellCenter {
  CellIndex cell;
  Vec2 center;
};

/// Jittered grid: one uniformly placed center strictly inside every cell of size
/// `cell_size` that intersects `region`. Centers depend only on (seed, cell index).
class GridSampling {
 public:
  GridSampling(double cell_size, Rect region, NoiseSeed seed);

  double cell_size() const noexcept { return cell_size_; }
  const Rect& region() const noexcept { return region_; }
  NoiseSeed seed() const noexcept { return seed_; }

  CellIndex cell_of(Vec2 p) const;
  bool has_cell(CellIndex c) const;
  Vec2 center(CellIndex c) const;

  /// Every (cell, center) pair, row-major by cell index.
  std::vector<CellCenter> jitter_centers() const;

 private:
  double cell_size_;
  Rect region_;
  NoiseSeed seed_;
  std::int64_t ix_begin_, ix_end_, iy_begin_, iy_end_;
};

struct NearestCenter {
  Vec2 center;
  double distance = 0.0;
};

/// Closest center among p's cell and its 8 neighbours. `reach` is the largest
/// distance a caller will act on (r + A for stains); it must not exceed the cell
/// size, otherwise a closer center could sit two cells away and ConfigError is thrown.
/// Returns nullopt when no cell of the region lies in the neighbourhood.
std::optional<NearestCenter> nearest_center(Vec2 p, const GridSampling& sampling, double reach);

}  // namespace seqcore
