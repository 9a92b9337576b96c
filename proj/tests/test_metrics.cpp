#include <algorithm>

#include "doctest.h"
#include "seqcore/metrics.hpp"
#include "seqcore/random.hpp"

using namespace seqcore;

namespace {

BinaryMask mask_of(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) {
  BinaryMask m(h, w);
  m.values() = std::move(v);
  return m;
}

constexpr auto kScratch = to_u8(ClassId::scratch);
constexpr auto kBump = to_u8(ClassId::bump);
constexpr auto kDent = to_u8(ClassId::dent);
constexpr auto kStain = to_u8(ClassId::water_stain);

struct Labels {
  ClassMask classes;
  InstanceMask instances;
};

// Paints a w x h block as instance `id` of class `cls`.
void paint(Labels& l, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w, std::uint8_t cls, std::uint16_t id) {
  for (std::size_t y = y0; y < y0 + h; ++y)
    for (std::size_t x = x0; x < x0 + w; ++x) {
      l.classes(y, x) = cls;
      l.instances(y, x) = id;
    }
}

}  // namespace

TEST_CASE("pixel_prf examples") {
  const auto a = mask_of(2, 2, {1, 1, 0, 0});
  CHECK(pixel_prf(a, a).f1 == 1.0);
  const auto empty = mask_of(2, 2, {0, 0, 0, 0});
  const auto e = pixel_prf(empty, a);
  CHECK(e.precision == 0.0);
  CHECK(e.recall == 0.0);
  CHECK(e.f1 == 0.0);
  const auto r = pixel_prf(mask_of(2, 2, {0, 1, 1, 0}), a);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == 0.5);
  const auto both_empty = pixel_prf(empty, empty);
  CHECK(both_empty.precision == 1.0);
  CHECK(both_empty.recall == 1.0);
  CHECK(both_empty.f1 == 1.0);
  const auto fp_only = pixel_prf(a, empty);
  CHECK(fp_only.precision == 0.0);
  CHECK(fp_only.recall == 0.0);
  CHECK_THROWS_AS(pixel_prf(a, BinaryMask(3, 2)), DimensionError);
}

TEST_CASE("per_class_recall examples") {
  ClassMask classes(4, 5);
  for (std::size_t x = 0; x < 5; ++x) classes(0, x) = classes(1, x) = kStain;  // 10 stain pixels
  for (std::size_t x = 0; x < 3; ++x) classes(3, x) = kScratch;
  BinaryMask pred(4, 5);
  pred(0, 0) = pred(0, 1) = pred(1, 4) = 1;
  auto r = per_class_recall(pred, classes);
  CHECK(*r[kStain] == doctest::Approx(0.3));
  CHECK(*r[kScratch] == 0.0);
  CHECK_FALSE(r[kBump].has_value());
  for (std::size_t x = 0; x < 5; ++x) pred(0, x) = pred(1, x) = 1;
  CHECK(*per_class_recall(pred, classes)[kStain] == 1.0);
  const auto empty = per_class_recall(BinaryMask(4, 5), classes);
  CHECK(*empty[kStain] == 0.0);
  CHECK_FALSE(empty[to_u8(ClassId::fingerprint)].has_value());
  classes(2, 2) = 9;
  CHECK_THROWS_AS(per_class_recall(pred, classes), DimensionError);
}

TEST_CASE("instance_set takes the majority class and drops background") {
  Labels l{ClassMask(4, 4), InstanceMask(4, 4)};
  paint(l, 0, 0, 2, 2, kScratch, 1);
  l.classes(0, 0) = kBump;  // minority
  paint(l, 2, 2, 2, 2, 0, 2);
  const auto s = instance_set(l.classes, l.instances);
  REQUIRE(s.instances.size() == 1);
  CHECK(s.instances[0].class_id == kScratch);
  CHECK(s.instances[0].pixels.size() == 4);
}

TEST_CASE("defectwise_recall examples") {
  Labels l{ClassMask(10, 10), InstanceMask(10, 10)};
  paint(l, 0, 0, 2, 5, kScratch, 1);  // 10 px
  paint(l, 4, 0, 2, 5, kScratch, 2);
  paint(l, 8, 0, 2, 5, kScratch, 3);
  const auto set = instance_set(l.classes, l.instances);
  BinaryMask pred(10, 10);
  pred(0, 0) = 1;
  for (std::size_t x = 0; x < 3; ++x) pred(4, x) = 1;  // 30 %
  auto r = defectwise_recall(pred, set, 0.0);
  CHECK(*r.per_class[kScratch] == doctest::Approx(2.0 / 3.0));
  CHECK(*r.mean_defect == doctest::Approx(2.0 / 3.0));
  r = defectwise_recall(pred, set, 50.0);
  CHECK(*r.per_class[kScratch] == 0.0);
  CHECK(*defectwise_recall(pred, set, 29.0).per_class[kScratch] == doctest::Approx(1.0 / 3.0));
  CHECK(*defectwise_recall(pred, set, 30.0).per_class[kScratch] == 0.0);

  BinaryMask all(10, 10, 1);
  CHECK(*defectwise_recall(all, set, 100.0).per_class[kScratch] == 1.0);
  CHECK(is_detected(10, 10, 100.0));
  CHECK_FALSE(is_detected(9, 10, 100.0));
  CHECK_FALSE(is_detected(0, 10, 0.0));
  CHECK(is_detected(1, 10, 0.0));
  CHECK_THROWS_AS(defectwise_recall(pred, set, 101.0), ConfigError);
  CHECK_THROWS_AS(defectwise_recall(BinaryMask(3, 3), set, 0.0), DimensionError);
}

TEST_CASE("mean defectwise recall covers defect classes only") {
  Labels l{ClassMask(6, 6), InstanceMask(6, 6)};
  paint(l, 0, 0, 2, 2, kScratch, 1);
  paint(l, 0, 3, 2, 2, kDent, 2);
  paint(l, 3, 0, 2, 2, kStain, 3);
  BinaryMask pred(6, 6);
  pred(0, 0) = 1;
  pred(3, 0) = 1;
  const auto r = defectwise_recall(pred, instance_set(l.classes, l.instances), 0.0);
  CHECK(*r.per_class[kStain] == 1.0);
  CHECK_FALSE(r.per_class[kBump].has_value());
  CHECK(*r.mean_defect == doctest::Approx(0.5));
  const auto none = defectwise_recall(pred, InstanceSet{6, 6, {}}, 0.0);
  CHECK_FALSE(none.mean_defect.has_value());
}

TEST_CASE("metrics match a brute-force oracle on random fixtures") {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 16;
    Labels l{ClassMask(n, n), InstanceMask(n, n)};
    const std::size_t count = 1 + rng.below(6);
    for (std::uint16_t id = 1; id <= count; ++id) {
      const auto cls = static_cast<std::uint8_t>(1 + rng.below(6));
      paint(l, rng.below(12), rng.below(12), 1 + rng.below(4), 1 + rng.below(4), cls, id);
    }
    BinaryMask pred(n, n);
    for (auto& v : pred.values()) v = rng.bernoulli(0.3);
    const double thr = std::array<double, 4>{0, 10, 50, 100}[rng.below(4)];

    MetricsAccumulator acc(thr, true);
    acc.add(pred, l.classes, l.instances);
    const auto rep = acc.report();

    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n * n; ++i) {
      const bool t = is_defect(static_cast<ClassId>(l.classes[i]));
      tp += pred[i] && t;
      fp += pred[i] && !t;
      fn += !pred[i] && t;
    }
    const PixelCounts pc{tp, fp, fn};
    CHECK(rep.pixel.f1 == doctest::Approx(pc.prf().f1));
    CHECK(rep.pixel.precision == doctest::Approx(pc.prf().precision));

    std::array<int, kClassCount> hit{}, total{};
    for (std::uint16_t id = 1; id <= count; ++id) {
      std::array<int, kClassCount> votes{};
      int size = 0, cov = 0;
      for (std::size_t i = 0; i < n * n; ++i)
        if (l.instances[i] == id) {
          ++votes[l.classes[i]];
          ++size;
          cov += pred[i];
        }
      if (size == 0) continue;  // fully overpainted
      const auto cls = std::max_element(votes.begin(), votes.end()) - votes.begin();
      ++total[cls];
      const bool det = thr >= 100 ? cov == size : cov * 100.0 > thr * size;
      hit[cls] += det;
    }
    double sum = 0;
    int k = 0;
    for (std::size_t c = 1; c < kClassCount; ++c) {
      if (total[c] == 0) {
        CHECK_FALSE(rep.defectwise.per_class[c].has_value());
        continue;
      }
      const double expected = static_cast<double>(hit[c]) / total[c];
      CHECK(*rep.defectwise.per_class[c] == doctest::Approx(expected));
      if (is_defect(static_cast<ClassId>(c))) {
        sum += expected;
        ++k;
      }
    }
    CHECK(rep.defectwise.mean_defect.has_value() == (k > 0));
    if (k > 0) CHECK(*rep.defectwise.mean_defect == doctest::Approx(sum / k));
  }
}

TEST_CASE("coverage sweep curves are non-increasing") {
  Rng rng(22);
  Labels l{ClassMask(32, 32), InstanceMask(32, 32)};
  for (std::uint16_t id = 1; id <= 12; ++id)
    paint(l, (id - 1) / 4 * 10, (id - 1) % 4 * 8, 6, 6, static_cast<std::uint8_t>(1 + id % 6), id);
  BinaryMask pred(32, 32);
  for (auto& v : pred.values()) v = rng.bernoulli(0.4);
  const auto rows = coverage_sweep(pred, instance_set(l.classes, l.instances));
  REQUIRE(rows.size() == kSweepThresholds.size());
  for (std::size_t k = 1; k < rows.size(); ++k)
    for (std::size_t c = 1; c < kClassCount; ++c)
      if (rows[k].recall.per_class[c]) CHECK(*rows[k].recall.per_class[c] <= *rows[k - 1].recall.per_class[c]);
  for (const auto& row : coverage_sweep(BinaryMask(32, 32), instance_set(l.classes, l.instances)))
    for (std::size_t c = 1; c < kClassCount; ++c)
      if (row.recall.per_class[c]) CHECK(*row.recall.per_class[c] == 0.0);
}

TEST_CASE("impurities hit by scattered single pixels vanish by threshold 5") {
  Labels l{ClassMask(64, 64), InstanceMask(64, 64)};
  paint(l, 0, 0, 10, 10, kStain, 1);
  paint(l, 0, 20, 10, 10, to_u8(ClassId::fingerprint), 2);
  paint(l, 0, 40, 10, 10, to_u8(ClassId::sticker), 3);
  paint(l, 30, 0, 4, 4, kScratch, 4);
  paint(l, 30, 20, 4, 4, kBump, 5);
  paint(l, 30, 40, 4, 4, kDent, 6);
  BinaryMask pred(64, 64);
  // Three stray pixels (3 %) on each impurity; defects fully covered.
  for (std::size_t x0 : {0u, 20u, 40u}) pred(1, x0 + 1) = pred(5, x0 + 5) = pred(8, x0 + 2) = 1;
  for (std::size_t y = 30; y < 34; ++y)
    for (std::size_t x = 0; x < 64; ++x) pred(y, x) = 1;
  const auto rows = coverage_sweep(pred, instance_set(l.classes, l.instances));
  for (const auto& row : rows) {
    const double expected = row.threshold < 3 ? 1.0 : 0.0;
    for (auto c : {ClassId::water_stain, ClassId::fingerprint, ClassId::sticker})
      CHECK(*row.recall.per_class[to_u8(c)] == expected);
    CHECK(*row.recall.mean_defect == 1.0);
  }
}

TEST_CASE("accumulator pools counts across images and serializes") {
  Labels l{ClassMask(4, 4), InstanceMask(4, 4)};
  paint(l, 0, 0, 2, 2, kBump, 1);
  BinaryMask hit(4, 4), miss(4, 4);
  hit(0, 0) = 1;
  MetricsAccumulator acc(0.0, true);
  acc.add(hit, l.classes, l.instances);
  acc.add(miss, l.classes, l.instances);
  const auto rep = acc.report();
  CHECK(rep.images == 2);
  CHECK(*rep.defectwise.per_class[kBump] == 0.5);
  CHECK(rep.pixel.recall == doctest::Approx(1.0 / 8.0));
  CHECK(rep.pixel.precision == 1.0);
  const Json j = to_json(rep);
  CHECK(j["mean_defectwise_recall"].get<double>() == 0.5);
  CHECK(j["coverage_sweep"].size() == kSweepThresholds.size());
  const std::string csv = to_csv(rep);
  CHECK(csv.rfind("section,key,class,value\n", 0) == 0);
  CHECK(csv.find("defectwise_recall,0,bump,0.500000") != std::string::npos);
  CHECK_THROWS_AS(MetricsAccumulator(-1.0, false), ConfigError);
}

TEST_CASE("perfect and empty predictions") {
  Labels l{ClassMask(8, 8), InstanceMask(8, 8)};
  paint(l, 1, 1, 3, 3, kScratch, 1);
  paint(l, 5, 5, 2, 2, kDent, 2);
  MetricsAccumulator perfect(0.0, false), empty(0.0, false);
  perfect.add(defect_mask(l.classes), l.classes, l.instances);
  empty.add(BinaryMask(8, 8), l.classes, l.instances);
  CHECK(perfect.report().pixel.f1 == 1.0);
  CHECK(*perfect.report().defectwise.mean_defect == 1.0);
  CHECK(empty.report().pixel.f1 == 0.0);
  CHECK(*empty.report().defectwise.mean_defect == 0.0);
}

TEST_CASE("overlay colours") {
  Image img(1, 4, 0.5f);
  const auto pred = mask_of(1, 4, {1, 1, 0, 0});
  const auto truth = mask_of(1, 4, {1, 0, 1, 0});
  const auto o = overlay(img, pred, truth);
  CHECK(o[0] == png::Rgb{0, 255, 0});
  CHECK(o[1] == png::Rgb{255, 0, 0});
  CHECK(o[2] == png::Rgb{0, 0, 255});
  CHECK(o[3] == png::Rgb{128, 128, 128});
}
