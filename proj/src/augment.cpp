#include "seqcore/augment.hpp"

#include <cmath>

#include "seqcore/kernels.hpp"
#include "seqcore/random.hpp"

namespace seqcore {

namespace {

void check_range(const std::optional<Range>& r, const char* name, double min_lo) {
  if (!r) return;
  if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || r->lo > r->hi || r->lo < min_lo)
    throw ConfigError(std::string("augment.") + name + ": invalid range");
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("augment.") + name + ": probability outside [0,1]");
}

Json range_json(const std::optional<Range>& r) { return r ? Json{r->lo, r->hi} : Json(nullptr); }

std::optional<Range> read_range(StrictObject& o, const std::string& key) {
  if (!o.has(key)) return std::nullopt;
  const Json& v = o.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(o.path(key) + ": expected [lo, hi] or null");
  return Range{v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

void AugmentPolicy::validate() const {
  check_range(brightness_delta, "brightness_delta", -1.0);
  check_range(contrast_factor, "contrast_factor", 0.0);
  check_range(blur_sigma, "blur_sigma", 0.0);
  check_range(noise_stddev, "noise_stddev", 0.0);
  check_probability(flip_horizontal, "flip_horizontal");
  check_probability(flip_vertical, "flip_vertical");
  if (region_mask) {
    check_probability(region_mask->probability, "region_mask.probability");
    const Range& s = region_mask->size;
    if (!(s.lo >= 0.0 && s.lo <= s.hi && s.hi <= 1.0)) throw ConfigError("augment.region_mask.size: invalid range");
  }
}

bool AugmentPolicy::is_identity() const {
  return !brightness_delta && !contrast_factor && flip_horizontal == 0.0 && flip_vertical == 0.0 && !blur_sigma &&
         !noise_stddev && !region_mask;
}

AugmentPolicy AugmentPolicy::standard() {
  AugmentPolicy p;
  p.brightness_delta = Range{0.0, 0.06};
  p.contrast_factor = Range{1.0, 1.15};
  p.flip_horizontal = 0.5;
  p.flip_vertical = 0.5;
  p.blur_sigma = Range{0.0, 0.8};
  p.noise_stddev = Range{0.0, 0.01};
  p.region_mask = RegionMask{};
  return p;
}

Json to_json(const AugmentPolicy& p) {
  Json j{{"brightness_delta", range_json(p.brightness_delta)},
         {"contrast_factor", range_json(p.contrast_factor)},
         {"flip_horizontal", p.flip_horizontal},
         {"flip_vertical", p.flip_vertical},
         {"blur_sigma", range_json(p.blur_sigma)},
         {"noise_stddev", range_json(p.noise_stddev)}};
  j["region_mask"] = p.region_mask ? Json{{"probability", p.region_mask->probability},
                                          {"size", {p.region_mask->size.lo, p.region_mask->size.hi}}}
                                   : Json(nullptr);
  return j;
}

AugmentPolicy augment_policy_from_json(const Json& j) {
  StrictObject o(j, "augment");
  AugmentPolicy p;
  p.brightness_delta = read_range(o, "brightness_delta");
  p.contrast_factor = read_range(o, "contrast_factor");
  o.read("flip_horizontal", p.flip_horizontal);
  o.read("flip_vertical", p.flip_vertical);
  p.blur_sigma = read_range(o, "blur_sigma");
  p.noise_stddev = read_range(o, "noise_stddev");
  if (o.has("region_mask") && !o.at("region_mask").is_null()) {
    StrictObject r(o.at("region_mask"), "augment.region_mask");
    AugmentPolicy::RegionMask m;
    r.read("probability", m.probability);
    if (auto s = read_range(r, "size")) m.size = *s;
    r.finish();
    p.region_mask = m;
  }
  o.finish();
  p.validate();
  return p;
}

std::uint64_t augment_seed(std::uint64_t base, std::uint64_t sample, std::uint64_t epoch) {
  return hash_combine(hash_combine(hash_combine(base, 0xA5A5), sample), epoch);
}

void mask_region(Image& image, ClassMask& classes, InstanceMask& instances, PixelRect rect) {
  rect.x1 = std::min(rect.x1, image.width());
  rect.y1 = std::min(rect.y1, image.height());
  for (std::size_t y = rect.y0; y < rect.y1; ++y)
    for (std::size_t x = rect.x0; x < rect.x1; ++x) {
      image(y, x) = 0.0f;
      classes(y, x) = 0;
      instances(y, x) = 0;
    }
}

AugmentedSample augment(const Image& image, const ClassMask& classes, const InstanceMask& instances,
                        const AugmentPolicy& policy, std::uint64_t seed) {
  require_same_shape(image, classes, "augment");
  require_same_shape(image, instances, "augment");
  AugmentedSample out{image, classes, instances, {}};
  if (policy.is_identity()) return out;
  Rng rng(seed);
  AugmentRecord& rec = out.record;

  if (policy.flip_horizontal > 0.0 && rng.bernoulli(policy.flip_horizontal)) {
    rec.flipped_h = true;
    flip_horizontal(out.image);
    flip_horizontal(out.classes);
    flip_horizontal(out.instances);
  }
  if (policy.flip_vertical > 0.0 && rng.bernoulli(policy.flip_vertical)) {
    rec.flipped_v = true;
    flip_vertical(out.image);
    flip_vertical(out.classes);
    flip_vertical(out.instances);
  }

  std::vector<float>& px = out.image.values();
  if (policy.brightness_delta) {
    rec.brightness = rng.uniform(policy.brightness_delta->lo, policy.brightness_delta->hi);
    for (float& v : px) v = static_cast<float>(v + rec.brightness);
  }
  if (policy.contrast_factor) {
    rec.contrast = rng.uniform(policy.contrast_factor->lo, policy.contrast_factor->hi);
    double mean = 0.0;
    for (float v : px) mean += v;
    mean /= static_cast<double>(px.size());
    for (float& v : px) v = static_cast<float>(mean + (v - mean) * rec.contrast);
  }
  if (policy.blur_sigma) {
    rec.blur_sigma = rng.uniform(policy.blur_sigma->lo, policy.blur_sigma->hi);
    if (rec.blur_sigma > 1e-3) {
      const auto size = static_cast<std::size_t>(2 * std::ceil(3.0 * rec.blur_sigma) + 1);
      const auto taps = kernels::gaussian_taps(rec.blur_sigma, size);
      out.image = kernels::omp::blur(out.image, taps);
    }
  }
  if (policy.noise_stddev) {
    rec.noise_stddev = rng.uniform(policy.noise_stddev->lo, policy.noise_stddev->hi);
    if (rec.noise_stddev > 0.0) {
      Rng noise(hash_combine(seed, 0x4E4F));
      for (float& v : out.image.values()) v = static_cast<float>(v + noise.normal() * rec.noise_stddev);
    }
  }
  for (float& v : out.image.values()) v = std::clamp(v, 0.0f, 1.0f);

  if (policy.region_mask && rng.bernoulli(policy.region_mask->probability)) {
    const std::size_t w = image.width(), h = image.height();
    const double frac = rng.uniform(policy.region_mask->size.lo, policy.region_mask->size.hi);
    const std::uint64_t side = rng.below(4);
    PixelRect r{0, 0, w, h};
    const auto extent = [&](std::size_t n) { return static_cast<std::size_t>(std::lround(frac * static_cast<double>(n))); };
    switch (side) {
      case 0: r.x1 = extent(w); break;           // left
      case 1: r.x0 = w - extent(w); break;       // right
      case 2: r.y1 = extent(h); break;           // top
      default: r.y0 = h - extent(h); break;      // bottom
    }
    rec.masked = r;
    mask_region(out.image, out.classes, out.instances, r);
  }
  return out;
}

}  // namespace seqcore
