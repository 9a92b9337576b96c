#pragma once

// Sequential coreset memory bank.
//
// The bank fills up to its capacity, then keeps a dense distance matrix between its
// members. A candidate patch p with nearest-member distance d_p replaces member
// min(i, j) of the globally closest pair (i, j) when d_p > d_m = D[i][j]. Only the
// bank and one batch of candidates are ever held in memory.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seqcore/json_util.hpp"
#include "seqcore/memory_probe.hpp"

namespace seqcore {

enum class ChangeAction { filled, replaced, rejected };

struct ChangeRecord {
  ChangeAction action = ChangeAction::rejected;
  std::size_t index = 0;  // slot written (filled / replaced)
  float d_p = 0.0f;       // candidate to nearest member; 0 while filling
  float d_m = 0.0f;       // closest-pair distance before the update; 0 while filling
};

struct MinPair {
  std::size_t i = 0;
  std::size_t j = 0;
  float distance = 0.0f;
};

class CoresetBank {
 public:
  CoresetBank(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t fill() const noexcept { return fill_; }
  bool full() const noexcept { return fill_ == capacity_; }

  std::span<const float> member(std::size_t i) const { return {members_.data() + i * dim_, dim_}; }
  /// Filled rows, row-major.
  std::span<const float> members() const { return {members_.data(), fill_ * dim_}; }

  /// Dense capacity x capacity matrix; valid once full.
  std::span<const float> distance_matrix() const noexcept { return distances_; }
  float distance(std::size_t i, std::size_t j) const { return distances_[i * capacity_ + j]; }

  ChangeRecord observe(std::span<const float> patch);

  /// Closest pair, ties to the smallest i then smallest j. Throws NotFullError.
  MinPair min_pair() const;

  Json& metadata() noexcept { return metadata_; }
  const Json& metadata() const noexcept { return metadata_; }
  std::string extractor_hash() const;

  /// Hash of shape and filled members.
  std::string content_hash() const;

  friend bool operator==(const CoresetBank& a, const CoresetBank& b);

  /// Rebuilds a bank from persisted state; used by load().
  static CoresetBank restore(std::size_t capacity, std::size_t dim, std::vector<float> members, std::size_t fill,
                             std::vector<float> distances, Json metadata);

 private:
  void build_distance_matrix();
  void rescan_row(std::size_t i);
  void replace(std::size_t slot, std::span<const float> patch);

  std::size_t capacity_;
  std::size_t dim_;
  std::size_t fill_ = 0;
  std::vector<float> members_;
  std::vector<float> distances_;
  // Upper-triangle running minimum per row: min over j > i of D[i][j].
  std::vector<float> row_min_;
  std::vector<std::uint32_t> row_arg_;
  TrackedVectors tracked_;
  Json metadata_;
};

/// A batch of candidate patches. Counted by VectorProbe while alive.
class PatchBatch {
 public:
  PatchBatch() = default;
  PatchBatch(std::size_t rows, std::size_t dim) : dim_(dim), data_(rows * dim), tracked_(rows) {}
  /// Adopts row-major `data` without copying.
  PatchBatch(std::vector<float>&& data, std::size_t dim)
      : dim_(dim), data_(std::move(data)), tracked_(dim == 0 ? 0 : data_.size() / dim) {}
  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const float> values() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  TrackedVectors tracked_;
};

/// Source of candidate patches, replayed once per epoch.
class PatchStream {
 public:
  virtual ~PatchStream() = default;
  virtual std::size_t dim() const = 0;
  /// Rewinds to the start; `epoch` lets augmenting streams vary per epoch.
  virtual void begin_epoch(std::size_t epoch) = 0;
  /// Next batch, at most the stream's chunk size; false once exhausted.
  virtual bool next(PatchBatch& batch) = 0;
};

/// Stream over an in-memory row-major matrix (tests, melding, small data).
class MatrixStream final : public PatchStream {
 public:
  MatrixStream(std::span<const float> rows, std::size_t dim, std::size_t chunk = 2048);
  std::size_t dim() const override { return dim_; }
  void begin_epoch(std::size_t) override { pos_ = 0; }
  bool next(PatchBatch& batch) override;

 private:
  std::span<const float> rows_;
  std::size_t dim_, chunk_, pos_ = 0;
};

struct EpochStats {
  std::size_t filled = 0;
  std::size_t replaced = 0;
  std::size_t rejected = 0;
  float d_m = 0.0f;  // after the epoch; 0 while not full
  std::size_t changes() const noexcept { return filled + replaced; }
};

struct FitStats {
  std::vector<EpochStats> epochs;  // whole history, including resumed epochs
  bool converged = false;          // last epoch made no change
  float final_d_m = 0.0f;
};

/// Runs observe over the stream for up to `max_epochs` epochs in total (epochs already
/// recorded in the bank metadata count), stopping after an epoch with no change.
FitStats fit(CoresetBank& bank, PatchStream& stream, std::size_t max_epochs = 5);

/// Epoch history stored in the bank metadata.
std::vector<EpochStats> epoch_history(const CoresetBank& bank);

/// Nearest-member distance per query row, processed `chunk_size` rows at a time.
std::vector<float> nn_distances(const CoresetBank& bank, std::span<const float> queries, std::size_t chunk_size = 2048);

/// Maximum over `points` of the distance to the nearest bank member.
double covering_radius(const CoresetBank& bank, std::span<const float> points);

/// Streams every source's members into a fresh bank until a pass changes nothing.
CoresetBank meld(std::span<const CoresetBank* const> sources, std::size_t target_capacity);

/// Reference reduction: drop one element of the closest pair until `target` remain.
/// Of the two, remove the one whose removal leaves the larger minimum pairwise
/// distance; on a tie, the one whose partner is left with the larger nearest-neighbour
/// distance; on a further tie, the lower index. O(n^2) memory.
CoresetBank reduce_topdown(std::span<const float> points, std::size_t dim, std::size_t target);

void save(const CoresetBank& bank, const std::filesystem::path& path);
CoresetBank load(const std::filesystem::path& path);

}  // namespace seqcore
