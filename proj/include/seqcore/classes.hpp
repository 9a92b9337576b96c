#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace seqcore {

/// Annotation classes. Defects are geometric surface imperfections, impurities
/// are foreign substances on the surface.
enum class ClassId : std::uint8_t {
  background = 0,
  water_stain = 1,
  fingerprint = 2,
  sticker = 3,
  scratch = 4,
  bump = 5,
  dent = 6,
};

inline constexpr std::size_t kClassCount = 7;

inline constexpr std::array<std::string_view, kClassCount> kClassNames = {
    "background", "water_stain", "fingerprint", "sticker", "scratch", "bump", "dent"};

inline constexpr std::array<ClassId, 3> kDefectClasses = {ClassId::scratch, ClassId::bump, ClassId::dent};

constexpr std::uint8_t to_u8(ClassId c) noexcept { return static_cast<std::uint8_t>(c); }

constexpr bool is_defect(ClassId c) noexcept {
  return c == ClassId::scratch || c == ClassId::bump || c == ClassId::dent;
}

constexpr bool is_impurity(ClassId c) noexcept {
  return c == ClassId::water_stain || c == ClassId::fingerprint || c == ClassId::sticker;
}

constexpr std::string_view class_name(std::uint8_t id) noexcept {
  return id < kClassCount ? kClassNames[id] : std::string_view{"unknown"};
}

inline std::optional<ClassId> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kClassCount; ++i)
    if (kClassNames[i] == name) return static_cast<ClassId>(i);
  return std::nullopt;
}

}  // namespace seqcore
