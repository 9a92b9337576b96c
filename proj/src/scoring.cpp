#include "seqcore/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqcore/binary_io.hpp"
#include "seqcore/kernels.hpp"
#include "seqcore/png_io.hpp"

namespace seqcore {

namespace {

constexpr char kMapMagic[] = "SQAM";
constexpr std::uint16_t kMapVersion = 1;

double f1_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

Grid<float> upsample_patch_scores(std::span<const float> patch_scores, const FeatureMap& features,
                                  std::size_t image_height, std::size_t image_width) {
  if (patch_scores.size() != features.patches()) throw DimensionError("upsample: score count != patch count");
  Grid<float> out(image_height, image_width);
  std::vector<std::size_t> col_of(image_width);
  for (std::size_t x = 0; x < image_width; ++x) col_of[x] = features.cell_col(x);
  for (std::size_t y = 0; y < image_height; ++y) {
    const std::size_t r = features.cell_row(y);
    for (std::size_t x = 0; x < image_width; ++x) out(y, x) = patch_scores[r * features.cols() + col_of[x]];
  }
  return out;
}

AnomalyMap score_map(const FeatureMap& features, const CoresetBank& bank, std::size_t image_height,
                     std::size_t image_width, const BlurParams& blur, std::size_t chunk_size) {
  if (features.dim() != bank.dim())
    throw DimensionError("score_map: feature dimension " + std::to_string(features.dim()) + " != coreset dimension " +
                         std::to_string(bank.dim()));
  if (image_height == 0 || image_width == 0) throw DimensionError("score_map: empty output size");
  const std::vector<float> patch = nn_distances(bank, features.values(), chunk_size);
  Grid<float> up = upsample_patch_scores(patch, features, image_height, image_width);
  AnomalyMap out;
  out.coreset_hash = bank.content_hash();
  out.blur = blur;
  if (blur.kernel <= 1 || blur.sigma <= 0.0) {
    out.scores = std::move(up);
  } else {
    const auto taps = kernels::gaussian_taps(blur.sigma, blur.kernel);
    out.scores = kernels::omp::blur(up, taps);
  }
  return out;
}

ThresholdEstimate estimate_threshold(std::span<const AnomalyMap> maps, std::span<const BinaryMask> truth,
                                     std::size_t max_candidates) {
  if (maps.size() != truth.size()) throw DimensionError("estimate_threshold: map and mask counts differ");
  std::vector<std::pair<float, std::uint8_t>> samples;
  std::uint64_t positives = 0;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    require_same_shape(maps[m].scores, truth[m], "estimate_threshold");
    for (std::size_t i = 0; i < truth[m].size(); ++i) {
      const std::uint8_t label = truth[m][i] ? 1 : 0;
      positives += label;
      samples.emplace_back(maps[m].scores[i], label);
    }
  }
  if (positives == 0) throw EmptyValidationError("estimate_threshold: validation masks contain no positive pixel");
  std::sort(samples.begin(), samples.end());

  // Distinct values ascending with the positive count at or below each.
  std::vector<float> values;
  std::vector<std::uint64_t> pos_le, all_le;
  std::uint64_t pos_acc = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    pos_acc += samples[k].second;
    if (k + 1 == samples.size() || samples[k + 1].first != samples[k].first) {
      values.push_back(samples[k].first);
      pos_le.push_back(pos_acc);
      all_le.push_back(k + 1);
    }
  }
  const auto total = static_cast<std::uint64_t>(samples.size());

  // Candidate k = -1 predicts everything; candidate k predicts scores > values[k].
  std::vector<std::ptrdiff_t> candidates;
  const auto nvals = static_cast<std::ptrdiff_t>(values.size());
  if (max_candidates == 0 || static_cast<std::size_t>(nvals) + 1 <= max_candidates) {
    for (std::ptrdiff_t k = -1; k < nvals; ++k) candidates.push_back(k);
  } else {
    candidates.push_back(-1);
    for (std::size_t q = 1; q < max_candidates; ++q) {
      const auto k = static_cast<std::ptrdiff_t>((static_cast<double>(q) / static_cast<double>(max_candidates - 1)) *
                                                 static_cast<double>(nvals - 1));
      if (k != candidates.back()) candidates.push_back(k);
    }
  }

  ThresholdEstimate best{0.0, -1.0, candidates.size()};
  for (std::ptrdiff_t k : candidates) {
    const std::uint64_t below_pos = k < 0 ? 0 : pos_le[static_cast<std::size_t>(k)];
    const std::uint64_t below_all = k < 0 ? 0 : all_le[static_cast<std::size_t>(k)];
    const std::uint64_t tp = positives - below_pos;
    const std::uint64_t fp = (total - below_all) - tp;
    const std::uint64_t fn = below_pos;
    const double f1 = f1_from_counts(tp, fp, fn);
    if (f1 > best.achieved_f1) {
      best.achieved_f1 = f1;
      best.value = k < 0 ? std::nextafter(static_cast<double>(values.front()), -std::numeric_limits<double>::infinity())
                         : static_cast<double>(values[static_cast<std::size_t>(k)]);
    }
  }
  return best;
}

BinaryMask binarize(const Grid<float>& scores, double t) {
  BinaryMask out(scores.height(), scores.width());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = static_cast<double>(scores[i]) > t ? 1 : 0;
  return out;
}

void save_anomaly_map(const AnomalyMap& map, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic({kMapMagic, 4});
  w.u16(kMapVersion);
  w.u32(static_cast<std::uint32_t>(map.scores.height()));
  w.u32(static_cast<std::uint32_t>(map.scores.width()));
  w.f32s(map.scores.values());
  w.save(path);
}

Grid<float> load_anomaly_map(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic({kMapMagic, 4});
  const std::uint16_t version = r.u16();
  if (version != kMapVersion) throw VersionError(path.string() + ": anomaly map version " + std::to_string(version));
  const std::uint32_t h = r.u32(), w = r.u32();
  if (r.remaining() != std::uint64_t{h} * w * 4) throw FormatError(path.string() + ": payload size mismatch");
  Grid<float> out(h, w);
  for (float& v : out.values()) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite score");
  }
  return out;
}

void save_anomaly_png(const AnomalyMap& map, const std::filesystem::path& path, double max_score) {
  if (max_score <= 0.0) {
    const auto& v = map.scores.values();
    max_score = v.empty() ? 1.0 : static_cast<double>(*std::max_element(v.begin(), v.end()));
    if (max_score <= 0.0) max_score = 1.0;
  }
  Image scaled(map.scores.height(), map.scores.width());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = static_cast<float>(map.scores[i] / max_score);
  png::write_gray8(path, png::quantize(scaled));
}

}  // namespace seqcore
