#include "seqcore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>

#include "seqcore/classes.hpp"
#include "seqcore/png_io.hpp"
#include "seqcore/random.hpp"

namespace seqcore {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Stains

void StainField::validate() const {
  const auto bad = [](const std::string& m) { throw ConfigError("stain field: " + m); };
  if (!(gamma > 0.0)) bad("gamma must be > 0");
  if (!(radius > 0.0)) bad("radius must be > 0");
  if (!(amplitude >= 0.0)) bad("amplitude must be >= 0");
  if (!(frequency > 0.0)) bad("frequency must be > 0");
  if (!std::isfinite(alpha)) bad("alpha must be finite");
  if (!(cell_size > 0.0)) bad("cell size must be > 0");
  if (reach() > cell_size)
    bad("r + A = " + std::to_string(reach()) + " exceeds cell size G = " + std::to_string(cell_size) +
        "; a stain may not outgrow its grid cell");
}

NoiseSeed stain_radius_seed(const StainField& field) { return {hash_combine(field.seed, 0x5241444955530001ULL)}; }
NoiseSeed stain_grid_seed(const StainField& field) { return {hash_combine(field.seed, 0x4A49545445520002ULL)}; }

StainModel::StainModel(const StainField& field, Rect region)
    : field_(field), sampling_((field.validate(), field.cell_size), region, stain_grid_seed(field)),
      radius_seed_(stain_radius_seed(field)) {}

double StainModel::perturbed_radius(Vec2 p) const {
  return field_.radius + perlin(p, field_.frequency, radius_seed_) * field_.amplitude;
}

std::optional<double> StainModel::center_distance(Vec2 p) const {
  if (field_.center) return norm(p - *field_.center);
  const auto hit = nearest_center(p, sampling_, field_.reach());
  if (!hit) return std::nullopt;
  return hit->distance;
}

StainSample StainModel::apply(Vec2 p, double reflectance_in) const {
  const double r_prime = perturbed_radius(p);
  const auto d = center_distance(p);
  if (!d || !(r_prime > 0.0) || *d > r_prime) return {reflectance_in, false};
  const double d_hat = *d / r_prime;
  return {reflectance_in + std::pow(d_hat, field_.gamma) * field_.alpha, true};
}

StainSample stain_reflectance(Vec2 p, double reflectance_in, const StainField& field, Rect region) {
  return StainModel(field, region).apply(p, reflectance_in);
}

// ---------------------------------------------------------------------------
// Texture and light

double brushed_texture(Vec2 p, const TextureParams& params, std::uint64_t seed) {
  const double c = std::cos(params.direction);
  const double s = std::sin(params.direction);
  const double u = p.x * c + p.y * s;
  const double v = -p.x * s + p.y * c;
  const double streak = perlin({u * params.along_frequency, v * params.streak_frequency}, 1.0, {hash_combine(seed, 11)});
  const double fine =
      perlin({u * params.along_frequency * 4.0, v * params.streak_frequency * 3.1}, 1.0, {hash_combine(seed, 12)});
  return std::clamp(params.base + params.contrast * (0.7 * streak + 0.3 * fine), 0.0, 1.0);
}

double illumination(std::size_t x, std::size_t y, std::size_t width, std::size_t height, const LightParams& light) {
  const double half = static_cast<double>(std::min(width, height)) / 2.0;
  const double qx = (static_cast<double>(x) + 0.5 - static_cast<double>(width) / 2.0) / half;
  const double qy = (static_cast<double>(y) + 0.5 - static_cast<double>(height) / 2.0) / half;
  const double rho = std::hypot(qx, qy);
  const double phi = std::atan2(qy, qx);
  const double theta = light.rotation_deg * std::numbers::pi / 180.0;
  const double ring = light.ring_radius * light.scale * (1.0 + light.hex_depth * std::cos(6.0 * (phi - theta)));
  const double w = light.ring_width * light.scale;
  const double g = std::exp(-(rho - ring) * (rho - ring) / (2.0 * w * w));
  return std::min(light.ambient + light.intensity * g, light.overexposure);
}

// ---------------------------------------------------------------------------
// Rendering

void PlateSpec::validate() const {
  if (width == 0 || height == 0) throw ConfigError("plate: width and height must be >= 1");
  if (!(texel_scale > 0.0)) throw ConfigError("plate: texel_scale must be > 0");
  if (light.scale <= 0.0) throw ConfigError("plate: light scale must be > 0");
  if (stains) stains->validate();
}

Rect PlateSpec::region() const {
  return {0.0, 0.0, static_cast<double>(width) * texel_scale, static_cast<double>(height) * texel_scale};
}

Vec2 PlateSpec::texel(std::size_t x, std::size_t y) const {
  return {(static_cast<double>(x) + 0.5) * texel_scale, (static_cast<double>(y) + 0.5) * texel_scale};
}

RenderedSample render_sample(const PlateSpec& spec, std::uint64_t seed) {
  spec.validate();
  RenderedSample out{Image(spec.height, spec.width), ClassMask(spec.height, spec.width),
                     InstanceMask(spec.height, spec.width)};
  std::optional<StainModel> model;
  if (spec.stains) model.emplace(*spec.stains, spec.region());
  const std::uint64_t texture_seed = hash_combine(seed, 0x7E47);
  const auto h = static_cast<std::ptrdiff_t>(spec.height);
  const std::size_t margin = spec.border_margin;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t sy = 0; sy < h; ++sy) {
    const auto y = static_cast<std::size_t>(sy);
    for (std::size_t x = 0; x < spec.width; ++x) {
      if (x < margin || y < margin || x + margin >= spec.width || y + margin >= spec.height) continue;
      const Vec2 p = spec.texel(x, y);
      double reflectance = brushed_texture(p, spec.texture, texture_seed);
      if (model) {
        const StainSample s = model->apply(p, reflectance);
        reflectance = s.reflectance;
        if (s.inside) out.classes(y, x) = to_u8(ClassId::water_stain);
      }
      const double v = reflectance * illumination(x, y, spec.width, spec.height, spec.light);
      out.image(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  label_stain_instances(out.classes, out.instances, 1);
  return out;
}

std::uint16_t label_stain_instances(const ClassMask& classes, InstanceMask& instances, std::uint16_t first_id) {
  const std::size_t h = classes.height(), w = classes.width();
  const auto stain = to_u8(ClassId::water_stain);
  std::uint16_t next = first_id;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] != stain || instances[i] != 0) continue;
    if (next == 0) throw SizeError("more than 65535 instances in one image");
    instances[i] = next;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const auto cy = static_cast<std::ptrdiff_t>(cur / w), cx = static_cast<std::ptrdiff_t>(cur % w);
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t ny = cy + dy, nx = cx + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) || nx >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          if (classes[j] == stain && instances[j] == 0) {
            instances[j] = next;
            stack.push_back(j);
          }
        }
    }
    ++next;
  }
  return next;
}

// ---------------------------------------------------------------------------
// Defects (plumbing)

std::vector<DefectShape> random_defects(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t count) {
  Rng rng(seed);
  std::vector<DefectShape> out;
  const double margin = 12.0;
  const std::uint64_t first = rng.below(3);
  for (std::size_t i = 0; i < count; ++i) {
    DefectShape d;
    d.class_id = to_u8(kDefectClasses[(first + i) % 3]);
    d.center = {rng.uniform(margin, std::max(margin + 1.0, static_cast<double>(width) - margin)),
                rng.uniform(margin, std::max(margin + 1.0, static_cast<double>(height) - margin))};
    d.angle = rng.uniform(0.0, std::numbers::pi);
    switch (static_cast<ClassId>(d.class_id)) {
      case ClassId::scratch:
        d.size = rng.uniform(8.0, 16.0);
        d.strength = rng.uniform(0.5, 0.65);
        break;
      case ClassId::bump:
        d.size = rng.uniform(5.0, 8.0);
        d.strength = rng.uniform(0.7, 0.9);
        break;
      default:
        d.size = rng.uniform(5.5, 8.5);
        d.strength = rng.uniform(0.6, 0.8);
        break;
    }
    out.push_back(d);
  }
  return out;
}

namespace {

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double t = len2 > 0.0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  return norm(p - (a + ab * t));
}

}  // namespace

void inject_defects(RenderedSample& sample, const std::vector<DefectShape>& defects) {
  const std::size_t h = sample.image.height(), w = sample.image.width();
  std::fill(sample.instances.values().begin(), sample.instances.values().end(), 0);
  std::uint16_t id = 1;
  for (const DefectShape& d : defects) {
    const Vec2 dir{std::cos(d.angle), std::sin(d.angle)};
    const double extent = d.size + 2.0;
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(d.center.y - extent)));
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(d.center.x - extent)));
    const auto y1 = std::min(h, static_cast<std::size_t>(std::max(0.0, std::ceil(d.center.y + extent + 1.0))));
    const auto x1 = std::min(w, static_cast<std::size_t>(std::max(0.0, std::ceil(d.center.x + extent + 1.0))));
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        const Vec2 p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
        const Vec2 rel = p - d.center;
        float& px = sample.image(y, x);
        bool hit = false;
        if (d.class_id == to_u8(ClassId::scratch)) {
          if (segment_distance(p, d.center - dir * d.size, d.center + dir * d.size) <= 1.0) {
            px = static_cast<float>(px * (1.0 - d.strength));
            hit = true;
          }
        } else {
          const double t = norm(rel) / d.size;
          if (t <= 1.0) {
            const double proj = (rel.x * dir.x + rel.y * dir.y) / d.size;
            double v = px;
            if (d.class_id == to_u8(ClassId::dent))
              v = v * (1.0 - 0.7 * d.strength * (1.0 - t * t)) + 0.6 * d.strength * proj * std::sqrt(1.0 - t * t);
            else
              v = v + d.strength * proj * (1.0 - t * t);
            px = static_cast<float>(std::clamp(v, 0.0, 1.0));
            hit = true;
          }
        }
        if (hit) {
          sample.classes(y, x) = d.class_id;
          sample.instances(y, x) = id;
        }
      }
    }
    ++id;
  }
  label_stain_instances(sample.classes, sample.instances, id);
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const StainField& f) {
  Json j{{"radius", f.radius},       {"frequency", f.frequency}, {"amplitude", f.amplitude},
         {"gamma", f.gamma},         {"alpha", f.alpha},         {"cell_size", f.cell_size},
         {"seed", f.seed}};
  if (f.center) j["center"] = {f.center->x, f.center->y};
  return j;
}

StainField stain_field_from_json(const Json& j) {
  StrictObject o(j, "stain");
  StainField f;
  o.read("radius", f.radius);
  o.read("frequency", f.frequency);
  o.read("amplitude", f.amplitude);
  o.read("gamma", f.gamma);
  o.read("alpha", f.alpha);
  o.read("cell_size", f.cell_size);
  o.read("seed", f.seed);
  if (o.has("center")) {
    std::array<double, 2> c{};
    o.read("center", c);
    f.center = Vec2{c[0], c[1]};
  }
  o.finish();
  return f;
}

Json to_json(const PlateSpec& s) {
  Json j{{"width", s.width},
         {"height", s.height},
         {"texel_scale", s.texel_scale},
         {"border_margin", s.border_margin},
         {"texture",
          {{"direction", s.texture.direction},
           {"streak_frequency", s.texture.streak_frequency},
           {"along_frequency", s.texture.along_frequency},
           {"contrast", s.texture.contrast},
           {"base", s.texture.base}}},
         {"light",
          {{"pattern", s.light.pattern},
           {"rotation_deg", s.light.rotation_deg},
           {"scale", s.light.scale},
           {"intensity", s.light.intensity},
           {"ambient", s.light.ambient},
           {"ring_radius", s.light.ring_radius},
           {"ring_width", s.light.ring_width},
           {"hex_depth", s.light.hex_depth},
           {"overexposure", s.light.overexposure}}}};
  j["stains"] = s.stains ? to_json(*s.stains) : Json(nullptr);
  return j;
}

void DatasetConfig::validate() const {
  if (count + val_count + test_count == 0) throw ConfigError("dataset: nothing to generate");
  if (width < 16 || height < 16) throw ConfigError("dataset: images must be at least 16x16");
  if (!(texel_scale > 0.0)) throw ConfigError("dataset: texel_scale must be > 0");
  if (paired || stains) stain.validate();
}

Json to_json(const DatasetConfig& c) {
  return Json{{"count", c.count},
              {"val_count", c.val_count},
              {"test_count", c.test_count},
              {"paired", c.paired},
              {"stains", c.stains},
              {"domain_randomization", c.domain_randomization},
              {"seed", c.seed},
              {"width", c.width},
              {"height", c.height},
              {"texel_scale", c.texel_scale},
              {"stain", to_json(c.stain)},
              {"defects_per_image", c.defects_per_image}};
}

DatasetConfig dataset_config_from_json(const Json& j) {
  StrictObject o(j, "dataset");
  DatasetConfig c;
  o.read("count", c.count);
  o.read("val_count", c.val_count);
  o.read("test_count", c.test_count);
  o.read("paired", c.paired);
  o.read("stains", c.stains);
  o.read("domain_randomization", c.domain_randomization);
  o.read("seed", c.seed);
  o.read("width", c.width);
  o.read("height", c.height);
  o.read("texel_scale", c.texel_scale);
  if (o.has("stain")) c.stain = stain_field_from_json(o.at("stain"));
  o.read("defects_per_image", c.defects_per_image);
  o.finish();
  return c;
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<const ManifestEntry*> DatasetManifest::select(const std::string& split,
                                                          std::optional<bool> has_stains) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& s : samples)
    if (s.split == split && (!has_stains || s.has_stains == *has_stains)) out.push_back(&s);
  return out;
}

Json to_json(const DatasetManifest& m) {
  Json samples = Json::array();
  for (const auto& s : m.samples)
    samples.push_back({{"id", s.id},
                       {"split", s.split},
                       {"image_path", s.image_path},
                       {"class_mask_path", s.class_mask_path},
                       {"instance_mask_path", s.instance_mask_path},
                       {"stain_mask_path", s.stain_mask_path.empty() ? Json(nullptr) : Json(s.stain_mask_path)},
                       {"light_variant", s.light_variant},
                       {"has_stains", s.has_stains},
                       {"spec_hash", s.spec_hash},
                       {"base_spec_hash", s.base_spec_hash},
                       {"seed", s.seed}});
  return Json{{"version", m.version}, {"seed", m.seed}, {"samples", samples}};
}

DatasetManifest manifest_from_json(const Json& j) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.split = s.at("split").get<std::string>();
      e.image_path = s.at("image_path").get<std::string>();
      e.class_mask_path = s.at("class_mask_path").get<std::string>();
      e.instance_mask_path = s.at("instance_mask_path").get<std::string>();
      if (s.contains("stain_mask_path") && !s.at("stain_mask_path").is_null())
        e.stain_mask_path = s.at("stain_mask_path").get<std::string>();
      e.light_variant = s.at("light_variant").get<std::string>();
      e.has_stains = s.at("has_stains").get<bool>();
      e.spec_hash = s.at("spec_hash").get<std::string>();
      e.base_spec_hash = s.value("base_spec_hash", std::string{});
      e.seed = s.value("seed", std::uint64_t{0});
      m.samples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (m.version != 1) throw VersionError("manifest version " + std::to_string(m.version) + " unsupported");
  return m;
}

DatasetManifest load_manifest(const fs::path& dataset_dir) {
  const fs::path path = dataset_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

std::vector<std::array<std::uint8_t, 3>> class_palette() {
  return {{0, 0, 0}, {0, 160, 255}, {255, 200, 0}, {200, 0, 255}, {255, 0, 0}, {0, 255, 0}, {255, 128, 0}};
}

// ---------------------------------------------------------------------------
// Dataset planning and generation

namespace {

struct LightVariant {
  const char* name;
  double rotation_deg;
  double scale;
};
constexpr LightVariant kVariants[3] = {{"base", 0.0, 1.0}, {"rot90", 90.0, 1.0}, {"scale2", 0.0, 2.0}};

std::string spec_hash(const PlateSpec& spec, std::uint64_t seed) {
  return hex64(fnv1a64(to_json(spec).dump() + "#" + std::to_string(seed)));
}

}  // namespace

std::vector<PlannedSample> plan_dataset(const DatasetConfig& config) {
  config.validate();
  std::vector<PlannedSample> out;
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", config.count}, {"val", config.val_count}, {"test", config.test_count}};
  for (std::size_t split_code = 0; split_code < 3; ++split_code) {
    const auto [split, n] = splits[split_code];
    const bool defected = split_code != 0;
    const std::size_t variants = (config.domain_randomization && !defected) ? 3 : 1;
    for (std::size_t idx = 0; idx < n; ++idx) {
      for (std::size_t v = 0; v < variants; ++v) {
        // Light variants get their own texture and stain realization.
        const std::uint64_t sample_seed =
            hash_combine(hash_combine(hash_combine(config.seed, split_code), idx), v);
        Rng rng(sample_seed);
        PlateSpec spec;
        spec.width = config.width;
        spec.height = config.height;
        spec.texel_scale = config.texel_scale;
        spec.texture.direction = rng.uniform(-0.05, 0.05);
        spec.texture.streak_frequency = rng.uniform(0.28, 0.42);
        spec.texture.contrast = rng.uniform(0.05, 0.09);
        spec.texture.base = rng.uniform(0.5, 0.6);
        spec.light.rotation_deg = kVariants[v].rotation_deg;
        spec.light.scale = kVariants[v].scale;
        StainField stain = config.stain;
        stain.seed = hash_combine(sample_seed, 0x57A1);
        stain.center.reset();

        std::vector<DefectShape> defects;
        if (defected)
          defects = random_defects(hash_combine(sample_seed, 0xDEF), config.width, config.height,
                                   config.defects_per_image);

        std::vector<bool> versions;
        if (config.paired)
          versions = {false, true};
        else
          versions = {config.stains};
        PlateSpec base = spec;
        for (bool with_stains : versions) {
          PlannedSample ps;
          ps.spec = spec;
          if (with_stains) ps.spec.stains = stain;
          ps.render_seed = sample_seed;
          ps.defects = defects;
          char id[96];
          std::snprintf(id, sizeof id, "%s_%04zu_%s_%s", split, idx, kVariants[v].name, with_stains ? "ws" : "clean");
          ManifestEntry& e = ps.entry;
          e.id = id;
          e.split = split;
          e.image_path = "images/" + e.id + ".png";
          e.class_mask_path = "class_masks/" + e.id + ".png";
          e.instance_mask_path = "instance_masks/" + e.id + ".png";
          if (with_stains) e.stain_mask_path = "stain_masks/" + e.id + ".png";
          e.light_variant = kVariants[v].name;
          e.has_stains = with_stains;
          e.spec_hash = spec_hash(ps.spec, sample_seed);
          e.base_spec_hash = spec_hash(base, sample_seed);
          e.seed = sample_seed;
          out.push_back(std::move(ps));
        }
      }
    }
  }
  return out;
}

DatasetManifest generate_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  const std::vector<PlannedSample> plan = plan_dataset(config);
  std::error_code ec;
  for (const char* sub : {"images", "class_masks", "instance_masks", "stain_masks"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  const auto palette = class_palette();
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(plan.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const PlannedSample& ps = plan[static_cast<std::size_t>(i)];
      RenderedSample r = render_sample(ps.spec, ps.render_seed);
      if (!ps.entry.stain_mask_path.empty()) {
        Grid<std::uint8_t> stain(r.classes.height(), r.classes.width());
        for (std::size_t k = 0; k < stain.size(); ++k) stain[k] = r.classes[k] == to_u8(ClassId::water_stain) ? 255 : 0;
        png::write_gray8(out_dir / ps.entry.stain_mask_path, stain);
      }
      if (!ps.defects.empty()) inject_defects(r, ps.defects);
      png::write_gray8(out_dir / ps.entry.image_path, png::quantize(r.image));
      png::write_indexed(out_dir / ps.entry.class_mask_path, r.classes, palette);
      png::write_gray16(out_dir / ps.entry.instance_mask_path, r.instances);
    } catch (...) {
#pragma omp critical(seqcore_generate_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  DatasetManifest manifest;
  manifest.seed = config.seed;
  for (const auto& ps : plan) manifest.samples.push_back(ps.entry);
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir.string());
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in " + out_dir.string());
  return manifest;
}

}  // namespace seqcore
