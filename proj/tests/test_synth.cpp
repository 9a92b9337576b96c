#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "seqcore/classes.hpp"
#include "seqcore/png_io.hpp"
#include "seqcore/synth.hpp"
#include "support.hpp"

using namespace seqcore;

namespace {

StainField single_stain(Vec2 c, double r, double A = 0.0) {
  StainField f;
  f.radius = r;
  f.amplitude = A;
  f.cell_size = 64.0;
  f.center = c;
  f.seed = 5;
  return f;
}

std::size_t count_class(const ClassMask& m, ClassId id) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v == to_u8(id);
  return n;
}

}  // namespace

TEST_CASE("stain_reflectance: center keeps the original reflectance") {
  StainField f = single_stain({20, 20}, 7.0, 2.0);
  const auto s = stain_reflectance({20, 20}, 0.6, f, {0, 0, 40, 40});
  CHECK(s.inside);
  CHECK(s.reflectance == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("stain_reflectance: boundary is R_i + alpha") {
  StainField f = single_stain({20, 20}, 7.0);
  const auto s = stain_reflectance({27, 20}, 0.6, f, {0, 0, 40, 40});
  CHECK(s.inside);
  CHECK(std::abs(s.reflectance - 0.3) < 1e-9);
}

TEST_CASE("stain_reflectance: outside is untouched") {
  StainField f = single_stain({20, 20}, 7.0);
  const auto s = stain_reflectance({27.01, 20}, 0.6, f, {0, 0, 40, 40});
  CHECK_FALSE(s.inside);
  CHECK(s.reflectance == 0.6);
}

TEST_CASE("stain_reflectance: A = 0 gives the exact disk") {
  StainField f = single_stain({20, 20}, 5.0);
  Rng rng(1);
  for (int k = 0; k < 2000; ++k) {
    const Vec2 p{rng.uniform(10, 30), rng.uniform(10, 30)};
    CHECK(stain_reflectance(p, 0.5, f, {0, 0, 40, 40}).inside == (norm(p - Vec2{20, 20}) <= 5.0));
  }
}

TEST_CASE("stain reflectance is non-increasing in d-hat for alpha < 0") {
  StainField f = single_stain({0, 0}, 10.0);
  double prev = 1.0;
  for (int k = 0; k <= 100; ++k) {
    const auto s = stain_reflectance({k * 0.1, 0}, 0.7, f, {-20, -20, 20, 20});
    CHECK(s.reflectance <= prev);
    prev = s.reflectance;
  }
}

TEST_CASE("StainField validation") {
  StainField f;
  CHECK_NOTHROW(f.validate());
  f.radius = 30;
  f.amplitude = 7;
  CHECK_THROWS_AS(f.validate(), ConfigError);  // r + A > G
  f = StainField{};
  f.gamma = 0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = StainField{};
  f.radius = 0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = StainField{};
  f.amplitude = -1;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  CHECK(StainField{}.alpha < 0.0);
}

TEST_CASE("single-stain mask area matches the disk") {
  for (double scale : {1.0, 0.5}) {
    PlateSpec spec;
    spec.width = spec.height = 96;
    spec.texel_scale = scale;
    const double r = 12.0 * scale * 1.5;
    spec.stains = single_stain({48 * scale, 48 * scale}, r);
    spec.stains->cell_size = 96;
    const auto out = render_sample(spec, 1);
    const double expected = std::numbers::pi * r * r / (scale * scale);
    const double got = static_cast<double>(count_class(out.classes, ClassId::water_stain));
    CHECK(std::abs(got - expected) / expected < 0.02);
  }
}

TEST_CASE("stain coverage grows with the radius") {
  std::set<std::size_t> prev;
  for (double r : {3.0, 5.0, 8.0, 12.0}) {
    PlateSpec spec;
    spec.width = spec.height = 48;
    spec.stains = single_stain({24, 24}, r);
    const auto out = render_sample(spec, 2);
    std::set<std::size_t> cur;
    for (std::size_t i = 0; i < out.classes.size(); ++i)
      if (out.classes[i]) cur.insert(i);
    for (auto i : prev) CHECK(cur.count(i) == 1);
    prev = cur;
  }
}

TEST_CASE("render_sample is deterministic") {
  PlateSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.stains = StainField{};
  const auto a = render_sample(spec, 9);
  const auto b = render_sample(spec, 9);
  CHECK(a.image == b.image);
  CHECK(a.classes == b.classes);
  CHECK(a.instances == b.instances);
  CHECK_FALSE(render_sample(spec, 10).image == a.image);
}

TEST_CASE("stains only change pixels near stain centers and inside the mask") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PlateSpec clean;
    clean.width = clean.height = 96;
    PlateSpec stained = clean;
    StainField f;
    f.seed = seed;
    stained.stains = f;
    const auto a = render_sample(clean, seed);
    const auto b = render_sample(stained, seed);
    const GridSampling grid(f.cell_size, stained.region(), stain_grid_seed(f));
    const auto centers = grid.jitter_centers();
    std::size_t stain_px = 0;
    for (std::size_t y = 0; y < 96; ++y)
      for (std::size_t x = 0; x < 96; ++x) {
        const bool in_mask = b.classes(y, x) == to_u8(ClassId::water_stain);
        stain_px += in_mask;
        if (a.image(y, x) != b.image(y, x)) {
          CHECK(in_mask);
          double best = 1e9;
          for (const auto& c : centers) best = std::min(best, norm(stained.texel(x, y) - c.center));
          CHECK(best <= f.reach());
        }
        if (!in_mask) CHECK(a.image(y, x) == b.image(y, x));
      }
    CHECK(stain_px > 0);
  }
}

TEST_CASE("stain instances are 8-connected components") {
  PlateSpec spec;
  spec.width = spec.height = 128;
  spec.stains = StainField{};
  const auto out = render_sample(spec, 4);
  std::set<std::uint16_t> ids;
  for (std::size_t i = 0; i < out.classes.size(); ++i) {
    CHECK((out.classes[i] == to_u8(ClassId::water_stain)) == (out.instances[i] != 0));
    if (out.instances[i]) ids.insert(out.instances[i]);
  }
  CHECK(ids.size() >= 4);
  CHECK(*ids.begin() == 1);
  CHECK(*ids.rbegin() == ids.size());
}

TEST_CASE("inject_defects labels defect instances before stains") {
  PlateSpec spec;
  spec.width = spec.height = 96;
  spec.stains = StainField{};
  auto s = render_sample(spec, 3);
  const auto defects = random_defects(17, 96, 96, 3);
  REQUIRE(defects.size() == 3);
  std::set<std::uint8_t> classes;
  for (const auto& d : defects) classes.insert(d.class_id);
  CHECK(classes.size() == 3);
  inject_defects(s, defects);
  for (std::uint16_t id = 1; id <= 3; ++id) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.instances.size(); ++i)
      if (s.instances[i] == id) {
        ++n;
        CHECK(is_defect(static_cast<ClassId>(s.classes[i])));
      }
    CHECK(n > 0);
  }
}

TEST_CASE("brushed texture and illumination stay in range") {
  TextureParams t;
  LightParams l;
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const double v = brushed_texture({rng.uniform(0, 500), rng.uniform(0, 500)}, t, 3);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    const double il = illumination(rng.below(128), rng.below(128), 128, 128, l);
    CHECK(il >= 0.0);
    CHECK(il <= l.overexposure);
  }
}

TEST_CASE("plan_dataset: paired mode yields clean and stained twins") {
  DatasetConfig c;
  c.count = 4;
  c.paired = true;
  const auto plan = plan_dataset(c);
  REQUIRE(plan.size() == 8);
  std::size_t stained = 0;
  for (std::size_t i = 0; i < plan.size(); i += 2) {
    CHECK_FALSE(plan[i].entry.has_stains);
    CHECK(plan[i + 1].entry.has_stains);
    CHECK(plan[i].entry.base_spec_hash == plan[i + 1].entry.base_spec_hash);
    CHECK(plan[i].entry.spec_hash == plan[i].entry.base_spec_hash);
    CHECK(plan[i].entry.spec_hash != plan[i + 1].entry.spec_hash);
    CHECK(plan[i].render_seed == plan[i + 1].render_seed);
    stained += plan[i + 1].entry.has_stains;
  }
  CHECK(stained == 4);
}

TEST_CASE("plan_dataset: domain randomization yields three light variants") {
  DatasetConfig c;
  c.count = 2;
  c.domain_randomization = true;
  const auto plan = plan_dataset(c);
  REQUIRE(plan.size() == 6);
  std::multiset<std::string> variants;
  for (const auto& p : plan) variants.insert(p.entry.light_variant);
  CHECK(variants.count("base") == 2);
  CHECK(variants.count("rot90") == 2);
  CHECK(variants.count("scale2") == 2);
  CHECK(plan[1].spec.light.rotation_deg == 90.0);
  CHECK(plan[2].spec.light.scale == 2.0);
}

TEST_CASE("plan_dataset: defects only in val and test") {
  DatasetConfig c;
  c.count = 2;
  c.val_count = 1;
  c.test_count = 1;
  for (const auto& p : plan_dataset(c)) CHECK(p.defects.empty() == (p.entry.split == "train"));
}

TEST_CASE("generate_dataset writes every file and is reproducible") {
  testing::TempDir dir("synth_gen");
  DatasetConfig c;
  c.count = 2;
  c.test_count = 1;
  c.paired = true;
  c.width = c.height = 48;
  const auto m1 = generate_dataset(c, dir / "a");
  const auto m2 = generate_dataset(c, dir / "b");
  REQUIRE(m1.samples.size() == 6);
  for (const auto& s : m1.samples) {
    CHECK(s.stain_mask_path.empty() == !s.has_stains);
    if (s.has_stains) CHECK(std::filesystem::exists(dir / "a" / s.stain_mask_path));
    for (const auto& p : {s.image_path, s.class_mask_path, s.instance_mask_path}) {
      REQUIRE(std::filesystem::exists(dir / "a" / p));
      std::ifstream fa(dir / "a" / p, std::ios::binary), fb(dir / "b" / p, std::ios::binary);
      CHECK(std::string(std::istreambuf_iterator<char>(fa), {}) == std::string(std::istreambuf_iterator<char>(fb), {}));
    }
  }
  CHECK(to_json(m1) == to_json(m2));
  const auto loaded = load_manifest(dir / "a");
  CHECK(to_json(loaded) == to_json(m1));
  const auto img = png::read_gray8(dir / "a" / m1.samples[0].image_path);
  CHECK(img.width() == 48);
}

TEST_CASE("dataset config JSON is strict and round-trips") {
  DatasetConfig c;
  c.count = 7;
  c.paired = true;
  c.stain.radius = 5;
  const auto back = dataset_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  Json j = to_json(c);
  j["colour"] = 1;
  CHECK_THROWS_AS(dataset_config_from_json(j), ConfigError);
  Json bad = to_json(c);
  bad["stain"]["radius"] = 40;
  CHECK_THROWS_AS(dataset_config_from_json(bad).validate(), ConfigError);
}

TEST_CASE("manifest parsing errors") {
  CHECK_THROWS_AS(manifest_from_json(Json{{"version", 2}, {"seed", 0}, {"samples", Json::array()}}), VersionError);
  CHECK_THROWS_AS(manifest_from_json(Json{{"seed", 0}}), FormatError);
  testing::TempDir dir("synth_missing");
  CHECK_THROWS_AS(load_manifest(dir.path()), IoError);
}
