#pragma once

// Procedural metal-plate renderer: brushed texture, ring-light illumination and
// jittered water stains, with pixel-precise class and instance annotations.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqcore/grid.hpp"
#include "seqcore/json_util.hpp"
#include "seqcore/noise.hpp"

namespace seqcore {

/// Water-stain process. Lengths are in texture units.
struct StainField {
  double radius = 7.0;        // base radius r
  double frequency = 0.18;    // perlin frequency f
  double amplitude = 2.5;     // perlin amplitude A
  double gamma = 2.0;         // decay exponent
  double alpha = -0.3;        // edge intensity; negative darkens
  double cell_size = 36.0;    // jitter grid G
  std::uint64_t seed = 0;
  std::optional<Vec2> center; // single-stain mode; bypasses the grid

  /// Throws ConfigError unless gamma > 0, r > 0, A >= 0 and r + A <= G.
  void validate() const;
  double reach() const noexcept { return radius + amplitude; }
};

struct StainSample {
  double reflectance = 0.0;
  bool inside = false;
};

/// Stain field bound to a surface region; caches the jitter grid.
class StainModel {
 public:
  StainModel(const StainField& field, Rect region);

  /// Perturbed radius r' at p.
  double perturbed_radius(Vec2 p) const;
  /// Distance from p to the stain center that governs it (nullopt: no center nearby).
  std::optional<double> center_distance(Vec2 p) const;
  StainSample apply(Vec2 p, double reflectance_in) const;

  const StainField& field() const noexcept { return field_; }
  const GridSampling& sampling() const noexcept { return sampling_; }

 private:
  StainField field_;
  GridSampling sampling_;
  NoiseSeed radius_seed_;
};

/// Seed used for the radius perturbation noise of a stain field.
NoiseSeed stain_radius_seed(const StainField& field);
/// Seed used for the jitter grid of a stain field.
NoiseSeed stain_grid_seed(const StainField& field);

/// One-shot evaluation; see StainModel::apply.
StainSample stain_reflectance(Vec2 p, double reflectance_in, const StainField& field, Rect region);

struct TextureParams {
  double direction = 0.0;          // streak direction, radians
  double streak_frequency = 0.35;  // across streaks, per texture unit
  double along_frequency = 0.012;  // along streaks, per texture unit
  double contrast = 0.07;
  double base = 0.55;
};

struct LightParams {
  int pattern = 0;             // 0: hexagonal ring light
  double rotation_deg = 0.0;   // 0 or 90
  double scale = 1.0;          // 1 or 2
  double intensity = 1.1;
  double ambient = 0.8;
  double ring_radius = 0.55;   // fraction of the half short side
  double ring_width = 0.12;
  double hex_depth = 0.15;
  double overexposure = 1.75;  // illumination clamp
};

struct PlateSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  double texel_scale = 1.0;  // texture units per pixel
  TextureParams texture;
  LightParams light;
  std::optional<StainField> stains;
  std::size_t border_margin = 0;

  void validate() const;
  Rect region() const;
  /// Texture-space position of a pixel center.
  Vec2 texel(std::size_t x, std::size_t y) const;
};

struct RenderedSample {
  Image image;
  ClassMask classes;
  InstanceMask instances;
};

double brushed_texture(Vec2 p, const TextureParams& params, std::uint64_t seed);
double illumination(std::size_t x, std::size_t y, std::size_t width, std::size_t height, const LightParams& light);

/// Pure function of (spec, seed). The stain block only changes pixels inside stains.
RenderedSample render_sample(const PlateSpec& spec, std::uint64_t seed);

/// Parametric defects drawn onto a render. This is test and dataset plumbing: the
/// shapes are simple stand-ins used to exercise detection metrics.
struct DefectShape {
  std::uint8_t class_id = 0;  // scratch, bump or dent
  Vec2 center;                // pixels
  double size = 6.0;          // scratch half-length or radius, pixels
  double angle = 0.0;         // scratch direction / shading direction
  double strength = 0.35;
};

std::vector<DefectShape> random_defects(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t count);
void inject_defects(RenderedSample& sample, const std::vector<DefectShape>& defects);

/// Labels 8-connected water-stain components in the class mask after `first_id`-1
/// existing instances. Returns the next free id.
std::uint16_t label_stain_instances(const ClassMask& classes, InstanceMask& instances, std::uint16_t first_id);

Json to_json(const StainField& f);
Json to_json(const PlateSpec& s);
StainField stain_field_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Dataset generation

struct DatasetConfig {
  std::size_t count = 16;       // train samples
  std::size_t val_count = 0;    // defected validation samples
  std::size_t test_count = 0;   // defected test samples
  bool paired = false;          // emit clean and stained twins
  bool stains = true;           // used when not paired
  bool domain_randomization = false;
  std::uint64_t seed = 0;
  std::size_t width = 128;
  std::size_t height = 128;
  double texel_scale = 1.0;
  StainField stain;             // seed is re-derived per sample
  std::size_t defects_per_image = 3;

  void validate() const;
};

Json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const Json& j);

struct ManifestEntry {
  std::string id;
  std::string split;
  std::string image_path;
  std::string class_mask_path;
  std::string instance_mask_path;
  std::string stain_mask_path;  // stains before defects are drawn; empty without stains
  std::string light_variant;  // base | rot90 | scale2
  bool has_stains = false;
  std::string spec_hash;
  std::string base_spec_hash;  // spec without the stain block
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  int version = 1;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> samples;

  std::vector<const ManifestEntry*> select(const std::string& split, std::optional<bool> has_stains) const;
};

Json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const Json& j);
DatasetManifest load_manifest(const std::filesystem::path& dataset_dir);

/// Palette used for class-mask PNGs (index = class id).
std::vector<std::array<std::uint8_t, 3>> class_palette();

/// The sample specs a config expands to, without rendering anything.
struct PlannedSample {
  ManifestEntry entry;
  PlateSpec spec;
  std::uint64_t render_seed = 0;
  std::vector<DefectShape> defects;
};
std::vector<PlannedSample> plan_dataset(const DatasetConfig& config);

/// Renders every planned sample (in parallel) into `out_dir` and writes manifest.json.
DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

}  // namespace seqcore
