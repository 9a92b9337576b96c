#include "seqcore/random.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace seqcore {

double Rng::normal() {
  const double u1 = open_unit_interval(engine_());
  const double u2 = unit_interval(engine_());
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  return fnv1a64({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace seqcore
