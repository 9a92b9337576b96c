#include "seqcore/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "seqcore/binary_io.hpp"
#include "seqcore/random.hpp"

namespace seqcore {

namespace {

constexpr char kFeatureMagic[] = "SQFM";
constexpr std::uint16_t kFeatureVersion = 1;

std::size_t grid_extent(std::size_t n, std::size_t window, std::size_t stride) {
  return n >= window ? (n - window) / stride + 1 : 1;
}

std::size_t nearest_cell(std::size_t pixel, const PatchGeometry& g, std::size_t cells) {
  const double c = (static_cast<double>(pixel) + 0.5 - static_cast<double>(g.receptive) / 2.0) /
                       static_cast<double>(g.stride) + 0.5;
  if (c <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(c), cells - 1);
}

const char* kind_name(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::local_stats: return "local_stats";
    case ExtractorKind::raw_patch: return "raw_patch";
    case ExtractorKind::external: return "external";
  }
  return "?";
}

// Per-pixel gradient magnitude and 4-bin orientation (0: horizontal gradient,
// 1: 45 deg, 2: vertical gradient, 3: 135 deg), central differences clamped at borders.
struct GradientField {
  Grid<float> magnitude;
  Grid<std::uint8_t> bin;
};

GradientField gradients(const Image& img) {
  const std::size_t h = img.height(), w = img.width();
  GradientField g{Grid<float>(h, w), Grid<std::uint8_t>(h, w)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double gx = (static_cast<double>(img(y, std::min(x + 1, w - 1))) - img(y, x > 0 ? x - 1 : 0)) / 2.0;
      const double gy = (static_cast<double>(img(std::min(y + 1, h - 1), x)) - img(y > 0 ? y - 1 : 0, x)) / 2.0;
      const double mag = std::hypot(gx, gy);
      g.magnitude(y, x) = static_cast<float>(mag);
      if (mag > 0.0) {
        double a = std::atan2(gy, gx);
        if (a < 0.0) a += std::numbers::pi;
        g.bin(y, x) = static_cast<std::uint8_t>(static_cast<int>(std::floor(a / (std::numbers::pi / 4.0) + 0.5)) % 4);
      }
    }
  }
  return g;
}

FeatureMap local_stats_level(const Image& img, const GradientField& grad, const ExtractorLevel& level, double gain) {
  const std::size_t rows = grid_extent(img.height(), level.window, level.stride);
  const std::size_t cols = grid_extent(img.width(), level.window, level.stride);
  FeatureMap map(rows, cols, kLocalStatsChannels, {level.stride, level.window});
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t sr = 0; sr < nrows; ++sr) {
    const auto r = static_cast<std::size_t>(sr);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t y0 = r * level.stride, x0 = c * level.stride;
      const std::size_t y1 = std::min(img.height(), y0 + level.window);
      const std::size_t x1 = std::min(img.width(), x0 + level.window);
      double sum = 0.0, sq = 0.0;
      double bins[4] = {0.0, 0.0, 0.0, 0.0};
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
          const double v = img(y, x);
          sum += v;
          sq += v * v;
          bins[grad.bin(y, x)] += grad.magnitude(y, x);
        }
      const auto n = static_cast<double>((y1 - y0) * (x1 - x0));
      const double mean = sum / n;
      const double var = std::max(0.0, sq / n - mean * mean);
      auto out = map.at(r, c);
      out[0] = static_cast<float>(mean);
      out[1] = var > 0.0 ? static_cast<float>(gain * std::sqrt(var)) : 0.0f;
      for (int b = 0; b < 4; ++b) out[2 + b] = static_cast<float>(gain * bins[b] / n);
    }
  }
  return map;
}

FeatureMap raw_patch_level(const Image& img, const ExtractorLevel& level) {
  const std::size_t rows = grid_extent(img.height(), level.window, level.stride);
  const std::size_t cols = grid_extent(img.width(), level.window, level.stride);
  FeatureMap map(rows, cols, level.window * level.window, {level.stride, level.window});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      auto out = map.at(r, c);
      for (std::size_t dy = 0; dy < level.window; ++dy)
        for (std::size_t dx = 0; dx < level.window; ++dx) {
          const std::size_t y = std::min(img.height() - 1, r * level.stride + dy);
          const std::size_t x = std::min(img.width() - 1, c * level.stride + dx);
          out[dy * level.window + dx] = img(y, x);
        }
    }
  return map;
}

}  // namespace

FeatureMap::FeatureMap(std::size_t rows, std::size_t cols, std::size_t dim, PatchGeometry geometry)
    : rows_(rows), cols_(cols), dim_(dim), geometry_(geometry), data_(rows * cols * dim, 0.0f) {}

std::size_t FeatureMap::cell_row(std::size_t y) const noexcept { return nearest_cell(y, geometry_, rows_); }
std::size_t FeatureMap::cell_col(std::size_t x) const noexcept { return nearest_cell(x, geometry_, cols_); }

void ExtractorSpec::validate() const {
  if (levels.empty()) throw ConfigError("extractor: at least one level required");
  if (pool_kernel < 1) throw ConfigError("extractor: pool kernel must be >= 1");
  for (const auto& l : levels)
    if (l.window < 1 || l.stride < 1 || l.stride > l.window)
      throw ConfigError("extractor: each level needs 1 <= stride <= window");
  if (!(texture_gain > 0.0)) throw ConfigError("extractor: texture_gain must be > 0");
}

std::string ExtractorSpec::hash() const { return hex64(fnv1a64(to_json(*this).dump())); }

Json to_json(const ExtractorSpec& s) {
  Json levels = Json::array();
  for (const auto& l : s.levels) levels.push_back({{"window", l.window}, {"stride", l.stride}});
  return Json{{"kind", kind_name(s.kind)},
              {"levels", levels},
              {"pool_kernel", s.pool_kernel},
              {"texture_gain", s.texture_gain}};
}

ExtractorSpec extractor_spec_from_json(const Json& j) {
  StrictObject o(j, "extractor");
  ExtractorSpec s;
  if (o.has("kind")) {
    std::string kind;
    o.read("kind", kind);
    if (kind == "local_stats") s.kind = ExtractorKind::local_stats;
    else if (kind == "raw_patch") s.kind = ExtractorKind::raw_patch;
    else if (kind == "external") s.kind = ExtractorKind::external;
    else throw ConfigError("extractor.kind: unknown '" + kind + "'");
  }
  if (o.has("levels")) {
    s.levels.clear();
    const Json& arr = o.at("levels");
    if (!arr.is_array()) throw ConfigError("extractor.levels: expected array");
    for (const auto& lj : arr) {
      StrictObject lo(lj, "extractor.levels[]");
      ExtractorLevel l;
      lo.read("window", l.window);
      lo.read("stride", l.stride);
      lo.finish();
      s.levels.push_back(l);
    }
  }
  o.read("pool_kernel", s.pool_kernel);
  o.read("texture_gain", s.texture_gain);
  o.finish();
  s.validate();
  return s;
}

std::uint64_t image_fingerprint(const Image& image) {
  const auto& v = image.values();
  std::uint64_t h = fnv1a64({reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(float)});
  return hash_combine(h, image.height() * 1000003ULL + image.width());
}

std::vector<FeatureMap> extract_levels(const Image& image, const ExtractorSpec& spec) {
  spec.validate();
  if (image.empty()) throw DimensionError("extract: empty image");
  if (spec.kind == ExtractorKind::external)
    throw ConfigError("extract: external features must be loaded from a feature file");
  std::vector<FeatureMap> maps;
  const std::uint64_t source = image_fingerprint(image);
  GradientField grad;
  if (spec.kind == ExtractorKind::local_stats) grad = gradients(image);
  for (const auto& level : spec.levels) {
    FeatureMap m = spec.kind == ExtractorKind::local_stats ? local_stats_level(image, grad, level, spec.texture_gain)
                                                           : raw_patch_level(image, level);
    m.image_height = image.height();
    m.image_width = image.width();
    m.source = source;
    maps.push_back(std::move(m));
  }
  return maps;
}

FeatureMap average_pool(const FeatureMap& map, std::size_t kernel) {
  if (kernel <= 1) return map;
  const std::size_t rows = (map.rows() + kernel - 1) / kernel;
  const std::size_t cols = (map.cols() + kernel - 1) / kernel;
  const PatchGeometry g = map.geometry();
  FeatureMap out(rows, cols, map.dim(), {g.stride * kernel, g.receptive + (kernel - 1) * g.stride});
  out.image_height = map.image_height;
  out.image_width = map.image_width;
  out.source = map.source;
  std::vector<double> acc(map.dim());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      std::size_t n = 0;
      for (std::size_t rr = r * kernel; rr < std::min(map.rows(), (r + 1) * kernel); ++rr)
        for (std::size_t cc = c * kernel; cc < std::min(map.cols(), (c + 1) * kernel); ++cc, ++n) {
          const auto v = map.at(rr, cc);
          for (std::size_t k = 0; k < map.dim(); ++k) acc[k] += v[k];
        }
      auto o = out.at(r, c);
      for (std::size_t k = 0; k < map.dim(); ++k) o[k] = static_cast<float>(acc[k] / static_cast<double>(n));
    }
  return out;
}

FeatureMap pool_concat(std::span<const FeatureMap> maps, std::size_t kernel) {
  if (maps.empty()) throw GeometryError("pool_concat: no maps");
  for (const auto& m : maps)
    if (m.source != maps[0].source || m.image_height != maps[0].image_height ||
        m.image_width != maps[0].image_width)
      throw GeometryError("pool_concat: maps come from different images");
  std::vector<FeatureMap> pooled;
  pooled.reserve(maps.size());
  for (const auto& m : maps) pooled.push_back(average_pool(m, kernel));
  if (pooled.size() == 1) return std::move(pooled.front());

  std::size_t finest = 0;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (pooled[i].patches() > pooled[finest].patches()) finest = i;
    dim += pooled[i].dim();
  }
  const FeatureMap& ref = pooled[finest];
  FeatureMap out(ref.rows(), ref.cols(), dim, ref.geometry());
  out.image_height = ref.image_height;
  out.image_width = ref.image_width;
  out.source = ref.source;
  const PatchGeometry& g = ref.geometry();
  for (std::size_t r = 0; r < ref.rows(); ++r) {
    // Pixel at the center of the fine cell.
    const std::size_t py = r * g.stride + g.receptive / 2;
    for (std::size_t c = 0; c < ref.cols(); ++c) {
      const std::size_t px = c * g.stride + g.receptive / 2;
      auto o = out.at(r, c);
      std::size_t offset = 0;
      for (const auto& m : pooled) {
        const auto v = m.at(m.cell_row(py), m.cell_col(px));
        std::copy(v.begin(), v.end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += m.dim();
      }
    }
  }
  return out;
}

FeatureMap extract(const Image& image, const ExtractorSpec& spec) {
  const auto levels = extract_levels(image, spec);
  return pool_concat(levels, spec.pool_kernel);
}

void save_external_features(const FeatureMap& map, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic({kFeatureMagic, 4});
  w.u16(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(map.rows()));
  w.u32(static_cast<std::uint32_t>(map.cols()));
  w.u32(static_cast<std::uint32_t>(map.dim()));
  w.u32(static_cast<std::uint32_t>(map.geometry().stride));
  w.u32(static_cast<std::uint32_t>(map.geometry().receptive));
  w.f32s(map.values());
  w.save(path);
}

FeatureMap load_external_features(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic({kFeatureMagic, 4});
  const std::uint16_t version = r.u16();
  if (version != kFeatureVersion) throw VersionError(path.string() + ": feature file version " + std::to_string(version));
  const std::uint32_t rows = r.u32(), cols = r.u32(), dim = r.u32(), stride = r.u32(), receptive = r.u32();
  if (rows == 0 || cols == 0 || dim == 0 || stride == 0 || receptive == 0)
    throw FormatError(path.string() + ": zero-sized feature map");
  const std::uint64_t count = std::uint64_t{rows} * cols * dim;
  if (r.remaining() != count * 4)
    throw FormatError(path.string() + ": payload size does not match header shape");
  FeatureMap map(rows, cols, dim, {stride, receptive});
  for (float& v : map.values()) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite feature value");
  }
  map.image_height = std::size_t{rows} * stride;
  map.image_width = std::size_t{cols} * stride;
  map.source = fnv1a64(path.filename().string());
  return map;
}

}  // namespace seqcore
