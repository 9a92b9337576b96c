#pragma once

#include <atomic>
#include <cstddef>
#include <utility>

namespace seqcore {

/// Process-wide count of patch feature vectors held by the coreset pipeline
/// (coreset storage plus in-flight query batches), with a high-water mark.
class VectorProbe {
 public:
  static void acquire(std::size_t n) noexcept;
  static void release(std::size_t n) noexcept;
  static std::size_t current() noexcept { return current_.load(); }
  static std::size_t peak() noexcept { return peak_.load(); }
  /// Restarts the high-water mark at the current level.
  static void reset_peak() noexcept { peak_.store(current_.load()); }

 private:
  static inline std::atomic<std::size_t> current_{0};
  static inline std::atomic<std::size_t> peak_{0};
};

/// RAII registration of `n` vectors with VectorProbe.
class TrackedVectors {
 public:
  TrackedVectors() = default;
  explicit TrackedVectors(std::size_t n) : n_(n) { VectorProbe::acquire(n_); }
  TrackedVectors(const TrackedVectors& o) : n_(o.n_) { VectorProbe::acquire(n_); }
  TrackedVectors(TrackedVectors&& o) noexcept : n_(o.n_) { o.n_ = 0; }
  TrackedVectors& operator=(TrackedVectors o) noexcept {
    std::swap(n_, o.n_);
    return *this;
  }
  ~TrackedVectors() { VectorProbe::release(n_); }

  std::size_t count() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
};

inline void VectorProbe::acquire(std::size_t n) noexcept {
  const std::size_t now = current_.fetch_add(n) + n;
  std::size_t prev = peak_.load();
  while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
  }
}

inline void VectorProbe::release(std::size_t n) noexcept { current_.fetch_sub(n); }

}  // namespace seqcore
