#include "doctest.h"
#include "seqcore/augment.hpp"
#include "seqcore/random.hpp"

using namespace seqcore;

namespace {

struct Fixture {
  Image image;
  ClassMask classes;
  InstanceMask instances;
};

// Every pixel carries its own coordinate so geometric steps can be traced.
Fixture coordinate_fixture(std::size_t h, std::size_t w) {
  Fixture f{Image(h, w), ClassMask(h, w), InstanceMask(h, w)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t k = y * w + x;
      f.image(y, x) = static_cast<float>(k + 1) / static_cast<float>(h * w);
      f.classes(y, x) = static_cast<std::uint8_t>(1 + k % 6);
      f.instances(y, x) = static_cast<std::uint16_t>(k + 1);
    }
  return f;
}

Fixture random_fixture(std::size_t h, std::size_t w, std::uint64_t seed) {
  Fixture f{Image(h, w), ClassMask(h, w), InstanceMask(h, w)};
  Rng rng(seed);
  for (auto& v : f.image.values()) v = static_cast<float>(rng.uniform());
  for (auto& v : f.classes.values()) v = static_cast<std::uint8_t>(rng.below(7));
  for (auto& v : f.instances.values()) v = static_cast<std::uint16_t>(rng.below(5));
  return f;
}

}  // namespace

TEST_CASE("identity policy returns the inputs unchanged") {
  const auto f = random_fixture(20, 30, 1);
  AugmentPolicy p;
  CHECK(p.is_identity());
  const auto out = augment(f.image, f.classes, f.instances, p, 42);
  CHECK(out.image == f.image);
  CHECK(out.classes == f.classes);
  CHECK(out.instances == f.instances);
}

TEST_CASE("double flips are the identity") {
  const auto f = random_fixture(7, 11, 2);
  Image img = f.image;
  flip_horizontal(img);
  CHECK_FALSE(img == f.image);
  flip_horizontal(img);
  CHECK(img == f.image);
  flip_vertical(img);
  CHECK_FALSE(img == f.image);
  flip_vertical(img);
  CHECK(img == f.image);
}

TEST_CASE("flip_horizontal mirrors columns") {
  const auto f = coordinate_fixture(3, 4);
  InstanceMask m = f.instances;
  flip_horizontal(m);
  CHECK(m(0, 0) == 4);
  CHECK(m(2, 3) == 9);
  flip_vertical(m);
  CHECK(m(0, 0) == 12);
}

TEST_CASE("geometric steps keep image and masks aligned") {
  AugmentPolicy p;
  p.flip_horizontal = 0.5;
  p.flip_vertical = 0.5;
  p.region_mask = AugmentPolicy::RegionMask{0.5, {0.1, 0.4}};
  const std::size_t h = 24, w = 32;
  const auto f = coordinate_fixture(h, w);
  int flips = 0, masks = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto out = augment(f.image, f.classes, f.instances, p, seed);
    flips += out.record.flipped_h + out.record.flipped_v;
    masks += out.record.masked.has_value();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::uint16_t id = out.instances(y, x);
        if (id == 0) {
          CHECK(out.image(y, x) == 0.0f);
          CHECK(out.classes(y, x) == 0);
          REQUIRE(out.record.masked);
          const auto& r = *out.record.masked;
          CHECK((y >= r.y0 && y < r.y1 && x >= r.x0 && x < r.x1));
          continue;
        }
        CHECK(out.image(y, x) == f.image.values()[id - 1]);
        CHECK(out.classes(y, x) == f.classes.values()[id - 1]);
        const std::size_t sy = (id - 1) / w, sx = (id - 1) % w;
        CHECK(sy == (out.record.flipped_v ? h - 1 - y : y));
        CHECK(sx == (out.record.flipped_h ? w - 1 - x : x));
      }
  }
  CHECK(flips > 0);
  CHECK(masks > 0);
}

TEST_CASE("region mask-out resets a border-anchored rectangle") {
  AugmentPolicy p;
  p.region_mask = AugmentPolicy::RegionMask{1.0, {0.25, 0.25}};
  const auto f = random_fixture(40, 40, 3);
  const auto out = augment(f.image, f.classes, f.instances, p, 7);
  REQUIRE(out.record.masked);
  const auto& r = *out.record.masked;
  CHECK((r.x0 == 0 || r.y0 == 0 || r.x1 == 40 || r.y1 == 40));
  std::size_t zeroed = 0;
  for (std::size_t y = r.y0; y < r.y1; ++y)
    for (std::size_t x = r.x0; x < r.x1; ++x) {
      zeroed += out.image(y, x) == 0.0f && out.classes(y, x) == 0 && out.instances(y, x) == 0;
    }
  CHECK(zeroed == (r.y1 - r.y0) * (r.x1 - r.x0));
  CHECK(zeroed > 0);
}

TEST_CASE("photometric steps leave masks alone and stay in [0,1]") {
  AugmentPolicy p = AugmentPolicy::standard();
  p.flip_horizontal = p.flip_vertical = 0.0;
  p.region_mask.reset();
  p.brightness_delta = Range{0.3, 0.5};
  const auto f = random_fixture(16, 16, 4);
  const auto out = augment(f.image, f.classes, f.instances, p, 9);
  CHECK(out.classes == f.classes);
  CHECK(out.instances == f.instances);
  CHECK_FALSE(out.image == f.image);
  for (float v : out.image.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("augment is pure in its seed") {
  const auto policy = AugmentPolicy::standard();
  const auto f = random_fixture(32, 32, 5);
  const auto a = augment(f.image, f.classes, f.instances, policy, 11);
  const auto b = augment(f.image, f.classes, f.instances, policy, 11);
  CHECK(a.image == b.image);
  CHECK(a.instances == b.instances);
  bool differs = false;
  for (std::uint64_t s = 12; s < 20 && !differs; ++s)
    differs = !(augment(f.image, f.classes, f.instances, policy, s).image == a.image);
  CHECK(differs);
  CHECK(augment_seed(1, 2, 3) == augment_seed(1, 2, 3));
  CHECK(augment_seed(1, 2, 3) != augment_seed(1, 2, 4));
  CHECK(augment_seed(1, 2, 3) != augment_seed(1, 3, 3));
}

TEST_CASE("augment policy JSON round-trips and validates") {
  const auto p = AugmentPolicy::standard();
  CHECK(to_json(augment_policy_from_json(to_json(p))) == to_json(p));
  Json bad = to_json(p);
  bad["flip_horizontal"] = 1.5;
  CHECK_THROWS_AS(augment_policy_from_json(bad), ConfigError);
  bad = to_json(p);
  bad["contrast_factor"] = Json{2.0, 1.0};
  CHECK_THROWS_AS(augment_policy_from_json(bad), ConfigError);
  bad = to_json(p);
  bad["rotate"] = true;
  CHECK_THROWS_AS(augment_policy_from_json(bad), ConfigError);
}
