#pragma once

// Patch feature extraction. The built-in extractors are lightweight hand-crafted
// descriptors; deep features can be produced offline and loaded from SQFM files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seqcore/grid.hpp"
#include "seqcore/json_util.hpp"

namespace seqcore {

/// Maps grid cell (r, c) to the pixel window [r*stride, r*stride + receptive).
struct PatchGeometry {
  std::size_t stride = 1;
  std::size_t receptive = 1;
  friend bool operator==(const PatchGeometry&, const PatchGeometry&) = default;
};

class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t rows, std::size_t cols, std::size_t dim, PatchGeometry geometry);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t patches() const noexcept { return rows_ * cols_; }
  const PatchGeometry& geometry() const noexcept { return geometry_; }

  std::span<float> at(std::size_t r, std::size_t c) { return {data_.data() + (r * cols_ + c) * dim_, dim_}; }
  std::span<const float> at(std::size_t r, std::size_t c) const {
    return {data_.data() + (r * cols_ + c) * dim_, dim_};
  }
  std::vector<float>& values() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  // Identifies the image the map was computed from.
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::uint64_t source = 0;

  /// Grid cell that owns pixel (y, x) for nearest-neighbour upsampling.
  std::size_t cell_row(std::size_t y) const noexcept;
  std::size_t cell_col(std::size_t x) const noexcept;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0, dim_ = 0;
  PatchGeometry geometry_;
  std::vector<float> data_;
};

enum class ExtractorKind { local_stats, raw_patch, external };

struct ExtractorLevel {
  std::size_t window = 8;
  std::size_t stride = 4;
};

struct ExtractorSpec {
  ExtractorKind kind = ExtractorKind::local_stats;
  std::vector<ExtractorLevel> levels{{8, 2}, {16, 4}};
  std::size_t pool_kernel = 2;
  /// Weight of std-dev and gradient channels relative to the mean (local_stats).
  double texture_gain = 4.0;

  void validate() const;
  /// Stable identifier stored with coresets; melding refuses mixed hashes.
  std::string hash() const;
};

Json to_json(const ExtractorSpec& s);
ExtractorSpec extractor_spec_from_json(const Json& j);

/// Channels per level for local_stats: mean, std, 4 gradient-orientation bins.
inline constexpr std::size_t kLocalStatsChannels = 6;

/// One unpooled map per level.
std::vector<FeatureMap> extract_levels(const Image& image, const ExtractorSpec& spec);

/// Average-pool every map with `kernel`, nearest-upsample to the finest grid and
/// concatenate channels.
FeatureMap pool_concat(std::span<const FeatureMap> maps, std::size_t kernel);

/// extract_levels followed by pool_concat.
FeatureMap extract(const Image& image, const ExtractorSpec& spec);

/// Average pool with a non-overlapping k x k window (partial windows at the border).
FeatureMap average_pool(const FeatureMap& map, std::size_t kernel);

void save_external_features(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap load_external_features(const std::filesystem::path& path);

std::uint64_t image_fingerprint(const Image& image);

}  // namespace seqcore
