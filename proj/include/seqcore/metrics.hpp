#pragma once

// Pixel-wise and defect-wise segmentation metrics. Everything is built on integer
// counts so per-image results aggregate associatively.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqcore/classes.hpp"
#include "seqcore/grid.hpp"
#include "seqcore/json_util.hpp"
#include "seqcore/png_io.hpp"

namespace seqcore {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PixelCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  PixelCounts& operator+=(const PixelCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  /// Empty prediction and empty truth scores (1, 1, 1).
  PRF prf() const;
};

PixelCounts pixel_counts(const BinaryMask& pred, const BinaryMask& truth);
PRF pixel_prf(const BinaryMask& pred, const BinaryMask& truth);

/// Pixels of defect classes (scratch, bump, dent).
BinaryMask defect_mask(const ClassMask& classes);

using PerClass = std::array<std::optional<double>, kClassCount>;

struct ClassCounts {
  std::array<std::uint64_t, kClassCount> hit{};
  std::array<std::uint64_t, kClassCount> total{};
  ClassCounts& operator+=(const ClassCounts& o);
  /// hit/total per class; classes with total 0 are absent.
  PerClass ratios() const;
};

/// Pixels of each class covered by the prediction.
ClassCounts class_coverage_counts(const BinaryMask& pred, const ClassMask& classes);
PerClass per_class_recall(const BinaryMask& pred, const ClassMask& classes);

struct Instance {
  std::uint16_t id = 0;
  std::uint8_t class_id = 0;
  std::vector<std::uint32_t> pixels;  // flat indices
};

/// Instances of one image. Ids are unique within the image only.
struct InstanceSet {
  std::size_t height = 0, width = 0;
  std::vector<Instance> instances;
};

/// Groups pixels by instance id; an instance takes the majority class of its pixels
/// (ties to the lower class id). Background-class instances are dropped.
InstanceSet instance_set(const ClassMask& classes, const InstanceMask& instances);

/// Instance detected iff covered*100 > threshold*size; threshold 100 means full coverage.
bool is_detected(std::uint64_t covered, std::uint64_t size, double threshold);

/// Detected and total instances per class.
ClassCounts detection_counts(const BinaryMask& pred, const InstanceSet& instances, double threshold);

struct DefectwiseRecall {
  PerClass per_class;
  std::optional<double> mean_defect;  // over defect classes present
};

DefectwiseRecall defectwise_from_counts(const ClassCounts& counts);
DefectwiseRecall defectwise_recall(const BinaryMask& pred, const InstanceSet& instances, double threshold);

inline constexpr std::array<double, 12> kSweepThresholds = {0, 1, 2, 3, 5, 10, 15, 20, 25, 50, 75, 100};

struct SweepRow {
  double threshold = 0.0;
  DefectwiseRecall recall;
};

std::vector<SweepRow> coverage_sweep(const BinaryMask& pred, const InstanceSet& instances);

struct MetricsReport {
  PRF pixel;
  PerClass class_pixel_recall;
  DefectwiseRecall defectwise;  // at the report's coverage threshold
  double coverage_threshold = 0.0;
  std::vector<SweepRow> sweep;  // empty unless requested
  std::size_t images = 0;
};

/// Accumulates counts image by image.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double coverage_threshold = 0.0, bool sweep = false);
  void add(const BinaryMask& pred, const ClassMask& classes, const InstanceMask& instances);
  MetricsReport report() const;

 private:
  double threshold_;
  bool sweep_;
  PixelCounts pixels_;
  ClassCounts classes_;
  ClassCounts detections_;
  std::vector<ClassCounts> sweep_counts_;
  std::size_t images_ = 0;
};

Json to_json(const MetricsReport& r);
std::string to_csv(const MetricsReport& r);

/// Green true positives, red false positives, blue false negatives over the image.
Grid<png::Rgb> overlay(const Image& image, const BinaryMask& pred, const BinaryMask& truth);

}  // namespace seqcore
