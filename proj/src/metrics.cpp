#include "seqcore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace seqcore {

PRF PixelCounts::prf() const {
  if (tp + fp == 0 && tp + fn == 0) return {1.0, 1.0, 1.0};
  PRF r;
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

PixelCounts pixel_counts(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(pred, truth, "pixel_prf");
  PixelCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
  }
  return c;
}

PRF pixel_prf(const BinaryMask& pred, const BinaryMask& truth) { return pixel_counts(pred, truth).prf(); }

BinaryMask defect_mask(const ClassMask& classes) {
  BinaryMask out(classes.height(), classes.width());
  for (std::size_t i = 0; i < classes.size(); ++i)
    out[i] = classes[i] < kClassCount && is_defect(static_cast<ClassId>(classes[i])) ? 1 : 0;
  return out;
}

ClassCounts& ClassCounts::operator+=(const ClassCounts& o) {
  for (std::size_t k = 0; k < kClassCount; ++k) {
    hit[k] += o.hit[k];
    total[k] += o.total[k];
  }
  return *this;
}

PerClass ClassCounts::ratios() const {
  PerClass out;
  for (std::size_t k = 0; k < kClassCount; ++k)
    if (total[k] > 0) out[k] = static_cast<double>(hit[k]) / static_cast<double>(total[k]);
  return out;
}

ClassCounts class_coverage_counts(const BinaryMask& pred, const ClassMask& classes) {
  require_same_shape(pred, classes, "per_class_recall");
  ClassCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint8_t k = classes[i];
    if (k >= kClassCount) throw DimensionError("per_class_recall: unknown class id " + std::to_string(k));
    ++c.total[k];
    c.hit[k] += pred[i] != 0;
  }
  return c;
}

PerClass per_class_recall(const BinaryMask& pred, const ClassMask& classes) {
  return class_coverage_counts(pred, classes).ratios();
}

InstanceSet instance_set(const ClassMask& classes, const InstanceMask& instances) {
  require_same_shape(classes, instances, "instance_set");
  std::map<std::uint16_t, std::pair<std::array<std::uint32_t, kClassCount>, std::vector<std::uint32_t>>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i] == 0) continue;
    auto& g = groups[instances[i]];
    if (classes[i] < kClassCount) ++g.first[classes[i]];
    g.second.push_back(static_cast<std::uint32_t>(i));
  }
  InstanceSet out{classes.height(), classes.width(), {}};
  for (auto& [id, g] : groups) {
    const auto cls = static_cast<std::uint8_t>(std::max_element(g.first.begin(), g.first.end()) - g.first.begin());
    if (cls == to_u8(ClassId::background)) continue;
    out.instances.push_back({id, cls, std::move(g.second)});
  }
  return out;
}

bool is_detected(std::uint64_t covered, std::uint64_t size, double threshold) {
  if (size == 0) return false;
  if (threshold >= 100.0) return covered >= size;
  return static_cast<double>(covered) * 100.0 > threshold * static_cast<double>(size);
}

namespace {

std::vector<std::uint64_t> instance_coverage(const BinaryMask& pred, const InstanceSet& instances) {
  if (pred.height() != instances.height || pred.width() != instances.width)
    throw DimensionError("defectwise_recall: prediction and instances differ in shape");
  std::vector<std::uint64_t> covered;
  covered.reserve(instances.instances.size());
  for (const auto& inst : instances.instances) {
    std::uint64_t c = 0;
    for (std::uint32_t i : inst.pixels) c += pred[i] != 0;
    covered.push_back(c);
  }
  return covered;
}

ClassCounts detections(const std::vector<std::uint64_t>& covered, const InstanceSet& instances, double threshold) {
  ClassCounts c;
  for (std::size_t k = 0; k < instances.instances.size(); ++k) {
    const auto& inst = instances.instances[k];
    ++c.total[inst.class_id];
    c.hit[inst.class_id] += is_detected(covered[k], inst.pixels.size(), threshold);
  }
  return c;
}

void check_threshold(double t) {
  if (!(t >= 0.0 && t <= 100.0)) throw ConfigError("coverage threshold must lie in [0, 100]");
}

}  // namespace

ClassCounts detection_counts(const BinaryMask& pred, const InstanceSet& instances, double threshold) {
  check_threshold(threshold);
  return detections(instance_coverage(pred, instances), instances, threshold);
}

DefectwiseRecall defectwise_from_counts(const ClassCounts& counts) {
  DefectwiseRecall r{counts.ratios(), std::nullopt};
  double sum = 0.0;
  int n = 0;
  for (ClassId c : kDefectClasses)
    if (const auto& v = r.per_class[to_u8(c)]) {
      sum += *v;
      ++n;
    }
  if (n > 0) r.mean_defect = sum / n;
  return r;
}

DefectwiseRecall defectwise_recall(const BinaryMask& pred, const InstanceSet& instances, double threshold) {
  return defectwise_from_counts(detection_counts(pred, instances, threshold));
}

std::vector<SweepRow> coverage_sweep(const BinaryMask& pred, const InstanceSet& instances) {
  const auto covered = instance_coverage(pred, instances);
  std::vector<SweepRow> rows;
  for (double t : kSweepThresholds) rows.push_back({t, defectwise_from_counts(detections(covered, instances, t))});
  return rows;
}

// ---------------------------------------------------------------------------

MetricsAccumulator::MetricsAccumulator(double coverage_threshold, bool sweep)
    : threshold_(coverage_threshold), sweep_(sweep), sweep_counts_(sweep ? kSweepThresholds.size() : 0) {
  check_threshold(coverage_threshold);
}

void MetricsAccumulator::add(const BinaryMask& pred, const ClassMask& classes, const InstanceMask& instances) {
  pixels_ += pixel_counts(pred, defect_mask(classes));
  classes_ += class_coverage_counts(pred, classes);
  const InstanceSet set = instance_set(classes, instances);
  const auto covered = instance_coverage(pred, set);
  detections_ += detections(covered, set, threshold_);
  for (std::size_t k = 0; k < sweep_counts_.size(); ++k)
    sweep_counts_[k] += detections(covered, set, kSweepThresholds[k]);
  ++images_;
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.pixel = pixels_.prf();
  r.class_pixel_recall = classes_.ratios();
  r.defectwise = defectwise_from_counts(detections_);
  r.coverage_threshold = threshold_;
  for (std::size_t k = 0; k < sweep_counts_.size(); ++k)
    r.sweep.push_back({kSweepThresholds[k], defectwise_from_counts(sweep_counts_[k])});
  r.images = images_;
  return r;
}

namespace {

Json per_class_json(const PerClass& v) {
  Json j = Json::object();
  for (std::size_t k = 1; k < kClassCount; ++k)
    if (v[k]) j[std::string(kClassNames[k])] = *v[k];
  return j;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string csv_value(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << *v;
  return s.str();
}

}  // namespace

Json to_json(const MetricsReport& r) {
  Json j{{"images", r.images},
         {"pixel", {{"precision", r.pixel.precision}, {"recall", r.pixel.recall}, {"f1", r.pixel.f1}}},
         {"class_pixel_recall", per_class_json(r.class_pixel_recall)},
         {"coverage_threshold", r.coverage_threshold},
         {"defectwise_recall", per_class_json(r.defectwise.per_class)},
         {"mean_defectwise_recall", optional_json(r.defectwise.mean_defect)}};
  if (!r.sweep.empty()) {
    Json rows = Json::array();
    for (const auto& row : r.sweep)
      rows.push_back({{"threshold", row.threshold},
                      {"defectwise_recall", per_class_json(row.recall.per_class)},
                      {"mean_defectwise_recall", optional_json(row.recall.mean_defect)}});
    j["coverage_sweep"] = rows;
  }
  return j;
}

std::string to_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "section,key,class,value\n";
  out << "pixel,precision,," << csv_value(r.pixel.precision) << '\n';
  out << "pixel,recall,," << csv_value(r.pixel.recall) << '\n';
  out << "pixel,f1,," << csv_value(r.pixel.f1) << '\n';
  for (std::size_t k = 1; k < kClassCount; ++k)
    if (r.class_pixel_recall[k]) out << "class_pixel_recall,," << kClassNames[k] << ',' << csv_value(r.class_pixel_recall[k]) << '\n';
  for (std::size_t k = 1; k < kClassCount; ++k)
    if (r.defectwise.per_class[k])
      out << "defectwise_recall," << r.coverage_threshold << ',' << kClassNames[k] << ','
          << csv_value(r.defectwise.per_class[k]) << '\n';
  out << "mean_defectwise_recall," << r.coverage_threshold << ",," << csv_value(r.defectwise.mean_defect) << '\n';
  for (const auto& row : r.sweep) {
    for (std::size_t k = 1; k < kClassCount; ++k)
      if (row.recall.per_class[k])
        out << "coverage_sweep," << row.threshold << ',' << kClassNames[k] << ',' << csv_value(row.recall.per_class[k])
            << '\n';
    out << "coverage_sweep_mean," << row.threshold << ",," << csv_value(row.recall.mean_defect) << '\n';
  }
  return out.str();
}

Grid<png::Rgb> overlay(const Image& image, const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(image, pred, "overlay");
  require_same_shape(image, truth, "overlay");
  Grid<png::Rgb> out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0f, 1.0f) * 255.0f));
    const bool p = pred[i] != 0, t = truth[i] != 0;
    if (p && t) out[i] = {0, 255, 0};
    else if (p) out[i] = {255, 0, 0};
    else if (t) out[i] = {0, 0, 255};
    else out[i] = {g, g, g};
  }
  return out;
}

}  // namespace seqcore
