#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>

#include "seqcore/grid.hpp"
#include "seqcore/json_util.hpp"

namespace seqcore {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Training-time augmentation. A disengaged optional disables that step.
struct AugmentPolicy {
  std::optional<Range> brightness_delta;  // additive
  std::optional<Range> contrast_factor;   // multiplicative about the image mean
  double flip_horizontal = 0.0;           // probabilities
  double flip_vertical = 0.0;
  std::optional<Range> blur_sigma;
  std::optional<Range> noise_stddev;
  struct RegionMask {
    double probability = 1.0;
    Range size{0.05, 0.25};  // fraction of the image side
  };
  std::optional<RegionMask> region_mask;

  void validate() const;
  bool is_identity() const;

  /// Brightness/contrast up, flips on both axes, light blur and noise, border mask-out.
  static AugmentPolicy standard();
};

Json to_json(const AugmentPolicy& p);
AugmentPolicy augment_policy_from_json(const Json& j);

/// Rectangle in pixels, half-open.
struct PixelRect {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// What a single draw of the policy did.
struct AugmentRecord {
  bool flipped_h = false;
  bool flipped_v = false;
  double brightness = 0.0;
  double contrast = 1.0;
  double blur_sigma = 0.0;
  double noise_stddev = 0.0;
  std::optional<PixelRect> masked;
};

struct AugmentedSample {
  Image image;
  ClassMask classes;
  InstanceMask instances;
  AugmentRecord record;
};

/// Geometric steps (flips, region mask-out) touch image and masks alike; photometric
/// steps touch the image only. Output clamped to [0,1]. Pure in (inputs, seed).
AugmentedSample augment(const Image& image, const ClassMask& classes, const InstanceMask& instances,
                        const AugmentPolicy& policy, std::uint64_t seed);

/// Seed for one (sample, epoch) realization.
std::uint64_t augment_seed(std::uint64_t base, std::uint64_t sample, std::uint64_t epoch);

/// Zeroes `rect` in the image and resets it to background in both masks.
void mask_region(Image& image, ClassMask& classes, InstanceMask& instances, PixelRect rect);

template <typename T>
void flip_horizontal(Grid<T>& g) {
  for (std::size_t y = 0; y < g.height(); ++y) {
    auto r = g.row(y);
    std::reverse(r.begin(), r.end());
  }
}

template <typename T>
void flip_vertical(Grid<T>& g) {
  for (std::size_t y = 0; y < g.height() / 2; ++y) {
    auto a = g.row(y);
    auto b = g.row(g.height() - 1 - y);
    std::swap_ranges(a.begin(), a.end(), b.begin());
  }
}

}  // namespace seqcore
