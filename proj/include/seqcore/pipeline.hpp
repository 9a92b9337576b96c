#pragma once

// End-to-end commands (synth, train, meld, score, eval) shared by the CLI and tests.
// Each command writes a run.json next to its outputs holding the resolved config and
// hashes of every input file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqcore/augment.hpp"
#include "seqcore/coreset.hpp"
#include "seqcore/features.hpp"
#include "seqcore/json_util.hpp"
#include "seqcore/metrics.hpp"
#include "seqcore/scoring.hpp"
#include "seqcore/synth.hpp"

namespace seqcore {

struct CoresetSettings {
  std::size_t capacity = 2048;
  std::size_t chunk = 2048;
  std::size_t max_epochs = 5;
};

struct TrainSettings {
  std::optional<bool> stains;            // filter on the train split; nullopt takes all
  std::optional<AugmentPolicy> augment;  // disabled when empty
  std::uint64_t augment_seed = 0;
};

struct ScoreSettings {
  std::optional<double> threshold;       // fixed threshold; otherwise estimated
  std::string estimate_on = "val";
  std::string split = "test";
  std::optional<bool> stains;            // filter on the scored and evaluated split
  std::optional<bool> estimate_stains;   // filter on the estimation split
  std::size_t max_candidates = 0;        // 0: exhaustive sweep
};

struct MetricSettings {
  double coverage_threshold = 0.0;
  bool sweep = false;
  bool overlays = false;
};

struct PipelineConfig {
  DatasetConfig dataset;
  ExtractorSpec extractor;
  CoresetSettings coreset;
  TrainSettings train;
  BlurParams blur;
  ScoreSettings score;
  MetricSettings metrics;

  void validate() const;
};

Json to_json(const PipelineConfig& c);
/// Strict: unknown keys anywhere raise ConfigError.
PipelineConfig pipeline_config_from_json(const Json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Hex FNV-1a of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

/// Patch stream over dataset images: one image is loaded, optionally augmented with
/// a per-(sample, epoch) seed, featurized, and handed out in chunks. With chunk >= the
/// patches of one image, at most |M| + chunk vectors are alive during fitting; a
/// smaller chunk keeps the whole image's features pending, bounding it by |M| + 2P.
class ImageStream final : public PatchStream {
 public:
  ImageStream(std::filesystem::path dataset_dir, std::vector<ManifestEntry> entries, ExtractorSpec spec,
              std::optional<AugmentPolicy> policy, std::uint64_t augment_seed, std::size_t chunk);

  std::size_t dim() const override { return dim_; }
  void begin_epoch(std::size_t epoch) override;
  bool next(PatchBatch& batch) override;

  std::size_t patches_per_epoch() const noexcept { return patches_per_epoch_; }

 private:
  FeatureMap featurize(std::size_t index) const;

  std::filesystem::path dir_;
  std::vector<ManifestEntry> entries_;
  ExtractorSpec spec_;
  std::optional<AugmentPolicy> policy_;
  std::uint64_t seed_;
  std::size_t chunk_;
  std::size_t dim_ = 0;
  std::size_t patches_per_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t next_image_ = 0;
  std::vector<float> pending_;  // rows of the current image not yet handed out
  std::size_t pending_pos_ = 0;
  TrackedVectors pending_tracked_;
};

Image load_image(const std::filesystem::path& path);

struct SynthResult {
  DatasetManifest manifest;
};
SynthResult run_synth(const PipelineConfig& config, const std::filesystem::path& out_dir);

struct TrainResult {
  FitStats fit;
  std::size_t images = 0;
  std::size_t peak_vectors = 0;  // VectorProbe high-water mark during fitting
};
/// Fits one epoch at a time and checkpoints the bank to `out` after each; with
/// `resume`, an existing `out` is loaded and training continues from its history.
TrainResult run_train(const PipelineConfig& config, const std::filesystem::path& dataset_dir,
                      const std::filesystem::path& out, bool resume = false);

CoresetBank run_meld(const std::vector<std::filesystem::path>& inputs, std::size_t size,
                     const std::filesystem::path& out);

struct ScoreResult {
  double threshold = 0.0;
  std::optional<ThresholdEstimate> estimate;
  std::size_t images = 0;
};
/// Writes maps/<id>.sqam, maps/<id>.png, masks/<id>.png and threshold.json.
ScoreResult run_score(const PipelineConfig& config, const std::filesystem::path& coreset_path,
                      const std::filesystem::path& dataset_dir, const std::filesystem::path& out_dir);

/// Anomaly maps for one split, in manifest order.
std::vector<AnomalyMap> score_split(const PipelineConfig& config, const CoresetBank& bank,
                                    const std::filesystem::path& dataset_dir, const std::vector<ManifestEntry>& entries);

/// Reads masks/<id>.png from `pred_dir` for the configured split; writes report.json
/// and report.csv (and overlays/ when enabled).
MetricsReport run_eval(const PipelineConfig& config, const std::filesystem::path& pred_dir,
                       const std::filesystem::path& dataset_dir, const std::filesystem::path& out_dir);

std::vector<ManifestEntry> split_entries(const DatasetManifest& manifest, const std::string& split,
                                         std::optional<bool> has_stains);

}  // namespace seqcore
