#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seqcore/random.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("seqcore_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double lo = 0.0,
                                        double hi = 1.0) {
  seqcore::Rng rng(seed);
  std::vector<float> out(n * dim);
  for (float& v : out) v = static_cast<float>(rng.uniform(lo, hi));
  return out;
}

}  // namespace testing
