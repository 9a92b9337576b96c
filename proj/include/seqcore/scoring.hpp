#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seqcore/coreset.hpp"
#include "seqcore/features.hpp"
#include "seqcore/grid.hpp"

namespace seqcore {

struct BlurParams {
  double sigma = 2.0;
  std::size_t kernel = 16;
};

struct AnomalyMap {
  Grid<float> scores;
  std::string coreset_hash;
  BlurParams blur;
};

/// Patch NN distances on the feature grid, nearest-upsampled to image_height x
/// image_width through the patch geometry, then Gaussian-blurred with symmetric padding.
AnomalyMap score_map(const FeatureMap& features, const CoresetBank& bank, std::size_t image_height,
                     std::size_t image_width, const BlurParams& blur = {}, std::size_t chunk_size = 2048);

/// Upsampling step alone: every pixel takes the score of the patch that owns it.
Grid<float> upsample_patch_scores(std::span<const float> patch_scores, const FeatureMap& features,
                                  std::size_t image_height, std::size_t image_width);

struct ThresholdEstimate {
  double value = 0.0;
  double achieved_f1 = 0.0;
  std::size_t sweep_size = 0;
};

/// Lowest threshold maximizing pixel F1 of (score > t) against the masks. Candidates
/// are every distinct score plus one just below the minimum; `max_candidates` > 0
/// subsamples them to that many quantile levels.
ThresholdEstimate estimate_threshold(std::span<const AnomalyMap> maps, std::span<const BinaryMask> truth,
                                     std::size_t max_candidates = 0);

/// pixel = 1 iff score > t.
BinaryMask binarize(const Grid<float>& scores, double t);

void save_anomaly_map(const AnomalyMap& map, const std::filesystem::path& path);
Grid<float> load_anomaly_map(const std::filesystem::path& path);
/// 8-bit PNG scaled by `max_score` (the map maximum when <= 0).
void save_anomaly_png(const AnomalyMap& map, const std::filesystem::path& path, double max_score = 0.0);

}  // namespace seqcore
