#include "seqcore/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqcore/binary_io.hpp"
#include "seqcore/kernels.hpp"
#include "seqcore/random.hpp"

namespace seqcore {

namespace {

constexpr char kCoresetMagic[] = "SQCS";
constexpr std::uint16_t kCoresetVersion = 1;
constexpr float kInf = std::numeric_limits<float>::infinity();

inline float to_distance(double squared) { return static_cast<float>(std::sqrt(squared)); }

void check_patch(std::span<const float> patch, std::size_t dim) {
  if (patch.size() != dim)
    throw DimensionError("patch has dimension " + std::to_string(patch.size()) + ", bank expects " +
                         std::to_string(dim));
  for (float v : patch)
    if (!std::isfinite(v)) throw NonFiniteError("patch contains a non-finite value");
}

Json epoch_json(const EpochStats& e) {
  return Json{{"filled", e.filled}, {"replaced", e.replaced}, {"rejected", e.rejected}, {"d_m", e.d_m}};
}

}  // namespace

// ---------------------------------------------------------------------------
// CoresetBank

CoresetBank::CoresetBank(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), members_(capacity * dim), tracked_(capacity),
      metadata_(Json::object()) {
  if (capacity < 1) throw SizeError("coreset capacity must be >= 1");
  if (dim < 1) throw DimensionError("coreset dimension must be >= 1");
}

std::string CoresetBank::extractor_hash() const { return metadata_.value("extractor_hash", std::string{}); }

std::string CoresetBank::content_hash() const {
  std::uint64_t h = hash_combine(capacity_, dim_);
  h = hash_combine(h, fill_);
  const auto m = members();
  h = hash_combine(h, fnv1a64({reinterpret_cast<const unsigned char*>(m.data()), m.size() * sizeof(float)}));
  return hex64(h);
}

bool operator==(const CoresetBank& a, const CoresetBank& b) {
  return a.capacity_ == b.capacity_ && a.dim_ == b.dim_ && a.fill_ == b.fill_ && a.members_ == b.members_ &&
         a.distances_ == b.distances_ && a.metadata_ == b.metadata_;
}

void CoresetBank::build_distance_matrix() {
  distances_.assign(capacity_ * capacity_, 0.0f);
  kernels::omp::pairwise(members_, dim_, distances_);
  row_min_.assign(capacity_, kInf);
  row_arg_.assign(capacity_, 0);
  for (std::size_t i = 0; i < capacity_; ++i) rescan_row(i);
}

void CoresetBank::rescan_row(std::size_t i) {
  float best = kInf;
  std::uint32_t arg = 0;
  const float* row = distances_.data() + i * capacity_;
  for (std::size_t j = i + 1; j < capacity_; ++j)
    if (row[j] < best) {
      best = row[j];
      arg = static_cast<std::uint32_t>(j);
    }
  row_min_[i] = best;
  row_arg_[i] = arg;
}

MinPair CoresetBank::min_pair() const {
  if (!full()) throw NotFullError("min_pair: bank holds " + std::to_string(fill_) + " of " + std::to_string(capacity_));
  if (capacity_ < 2) throw SizeError("min_pair: a pair needs capacity >= 2");
  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < capacity_; ++i)
    if (row_min_[i] < row_min_[best]) best = i;
  return {best, row_arg_[best], row_min_[best]};
}

void CoresetBank::replace(std::size_t slot, std::span<const float> patch) {
  std::copy(patch.begin(), patch.end(), members_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
  const float* p = members_.data() + slot * dim_;
  for (std::size_t j = 0; j < capacity_; ++j) {
    const float d = j == slot ? 0.0f : to_distance(kernels::squared_distance(p, members_.data() + j * dim_, dim_));
    distances_[slot * capacity_ + j] = d;
    distances_[j * capacity_ + slot] = d;
  }
  rescan_row(slot);
  for (std::size_t i = 0; i < slot; ++i) {
    const float v = distances_[i * capacity_ + slot];
    if (row_arg_[i] == slot) {
      if (v > row_min_[i]) rescan_row(i);
      else row_min_[i] = v;
    } else if (v < row_min_[i] || (v == row_min_[i] && slot < row_arg_[i])) {
      row_min_[i] = v;
      row_arg_[i] = static_cast<std::uint32_t>(slot);
    }
  }
}

ChangeRecord CoresetBank::observe(std::span<const float> patch) {
  check_patch(patch, dim_);
  if (!full()) {
    const std::size_t slot = fill_;
    std::copy(patch.begin(), patch.end(), members_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
    ++fill_;
    if (full() && capacity_ >= 2) build_distance_matrix();
    else if (full()) distances_.assign(1, 0.0f);
    return {ChangeAction::filled, slot, 0.0f, 0.0f};
  }
  if (capacity_ < 2) {
    kernels::NearestHit hit;
    kernels::serial::nearest(patch, members(), dim_, {&hit, 1});
    return {ChangeAction::rejected, 0, to_distance(hit.squared), 0.0f};
  }
  kernels::NearestHit hit;
  kernels::serial::nearest(patch, members(), dim_, {&hit, 1});
  const float d_p = to_distance(hit.squared);
  const MinPair mp = min_pair();
  if (d_p > mp.distance) {
    replace(mp.i, patch);
    return {ChangeAction::replaced, mp.i, d_p, mp.distance};
  }
  return {ChangeAction::rejected, 0, d_p, mp.distance};
}

CoresetBank CoresetBank::restore(std::size_t capacity, std::size_t dim, std::vector<float> members, std::size_t fill,
                                 std::vector<float> distances, Json metadata) {
  CoresetBank bank(capacity, dim);
  if (members.size() != capacity * dim || fill > capacity) throw FormatError("coreset state has inconsistent shape");
  bank.members_ = std::move(members);
  bank.fill_ = fill;
  bank.metadata_ = std::move(metadata);
  if (bank.full() && capacity >= 2) {
    if (distances.size() != capacity * capacity) throw FormatError("coreset distance matrix has wrong size");
    bank.distances_ = std::move(distances);
    bank.row_min_.assign(capacity, kInf);
    bank.row_arg_.assign(capacity, 0);
    for (std::size_t i = 0; i < capacity; ++i) bank.rescan_row(i);
  } else if (bank.full()) {
    bank.distances_.assign(1, 0.0f);
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Streams and fitting

MatrixStream::MatrixStream(std::span<const float> rows, std::size_t dim, std::size_t chunk)
    : rows_(rows), dim_(dim), chunk_(chunk) {
  if (dim == 0 || rows.size() % dim != 0) throw DimensionError("MatrixStream: size is not a multiple of dim");
  if (chunk == 0) throw ConfigError("MatrixStream: chunk must be >= 1");
}

bool MatrixStream::next(PatchBatch& batch) {
  const std::size_t total = rows_.size() / dim_;
  if (pos_ >= total) return false;
  const std::size_t n = std::min(chunk_, total - pos_);
  batch = PatchBatch(n, dim_);
  std::copy_n(rows_.begin() + static_cast<std::ptrdiff_t>(pos_ * dim_), n * dim_, batch.storage().begin());
  pos_ += n;
  return true;
}

std::vector<EpochStats> epoch_history(const CoresetBank& bank) {
  std::vector<EpochStats> out;
  if (!bank.metadata().contains("epochs")) return out;
  for (const auto& e : bank.metadata().at("epochs"))
    out.push_back({e.at("filled").get<std::size_t>(), e.at("replaced").get<std::size_t>(),
                   e.at("rejected").get<std::size_t>(), e.at("d_m").get<float>()});
  return out;
}

FitStats fit(CoresetBank& bank, PatchStream& stream, std::size_t max_epochs) {
  if (stream.dim() != bank.dim())
    throw DimensionError("fit: stream dimension " + std::to_string(stream.dim()) + " != bank dimension " +
                         std::to_string(bank.dim()));
  FitStats stats;
  stats.epochs = epoch_history(bank);
  stats.converged = !stats.epochs.empty() && stats.epochs.back().changes() == 0;
  PatchBatch batch;
  while (!stats.converged && stats.epochs.size() < max_epochs) {
    const std::size_t epoch = stats.epochs.size();
    stream.begin_epoch(epoch);
    EpochStats e;
    while (stream.next(batch)) {
      for (std::size_t r = 0; r < batch.rows(); ++r) {
        switch (bank.observe(batch.row(r)).action) {
          case ChangeAction::filled: ++e.filled; break;
          case ChangeAction::replaced: ++e.replaced; break;
          case ChangeAction::rejected: ++e.rejected; break;
        }
      }
      batch = PatchBatch();
    }
    e.d_m = bank.full() && bank.capacity() >= 2 ? bank.min_pair().distance : 0.0f;
    stats.epochs.push_back(e);
    if (!bank.metadata().contains("epochs")) bank.metadata()["epochs"] = Json::array();
    bank.metadata()["epochs"].push_back(epoch_json(e));
    stats.converged = e.changes() == 0;
  }
  stats.final_d_m = bank.full() && bank.capacity() >= 2 ? bank.min_pair().distance : 0.0f;
  return stats;
}

// ---------------------------------------------------------------------------
// Inference

std::vector<float> nn_distances(const CoresetBank& bank, std::span<const float> queries, std::size_t chunk_size) {
  if (chunk_size < 1) throw ConfigError("nn_distances: chunk size must be >= 1");
  if (bank.fill() == 0) throw NotFullError("nn_distances: bank is empty");
  if (queries.size() % bank.dim() != 0) throw DimensionError("nn_distances: query size is not a multiple of dim");
  const std::size_t n = queries.size() / bank.dim();
  std::vector<float> out(n);
  std::vector<kernels::NearestHit> hits;
  for (std::size_t start = 0; start < n; start += chunk_size) {
    const std::size_t rows = std::min(chunk_size, n - start);
    hits.resize(rows);
    kernels::omp::nearest(queries.subspan(start * bank.dim(), rows * bank.dim()), bank.members(), bank.dim(), hits);
    for (std::size_t r = 0; r < rows; ++r) out[start + r] = to_distance(hits[r].squared);
  }
  return out;
}

double covering_radius(const CoresetBank& bank, std::span<const float> points) {
  const auto d = nn_distances(bank, points);
  return d.empty() ? 0.0 : static_cast<double>(*std::max_element(d.begin(), d.end()));
}

// ---------------------------------------------------------------------------
// Melding

CoresetBank meld(std::span<const CoresetBank* const> sources, std::size_t target_capacity) {
  if (sources.empty()) throw SizeError("meld: no sources");
  if (target_capacity < 1) throw SizeError("meld: target capacity must be >= 1");
  const std::size_t dim = sources[0]->dim();
  const std::string hash = sources[0]->extractor_hash();
  for (const CoresetBank* s : sources) {
    if (s->dim() != dim) throw DimensionError("meld: sources have different dimensions");
    if (s->extractor_hash() != hash) throw MixedExtractorError("meld: sources were built with different extractors");
  }
  CoresetBank out(target_capacity, dim);
  Json source_hashes = Json::array();
  for (const CoresetBank* s : sources) source_hashes.push_back(s->content_hash());
  out.metadata()["extractor_hash"] = hash;
  out.metadata()["melded_from"] = source_hashes;

  // Every pass is a full sweep of the sources; d_m never decreases and the candidate
  // set is finite, so this terminates. The cap only guards against float pathologies.
  constexpr std::size_t kMaxPasses = 10000;
  std::size_t passes = 0;
  for (bool changed = true; changed && passes < kMaxPasses; ++passes) {
    changed = false;
    for (const CoresetBank* s : sources)
      for (std::size_t i = 0; i < s->fill(); ++i)
        if (out.observe(s->member(i)).action != ChangeAction::rejected) changed = true;
  }
  out.metadata()["meld_passes"] = passes;
  return out;
}

// ---------------------------------------------------------------------------
// Top-down reference reduction

CoresetBank reduce_topdown(std::span<const float> points, std::size_t dim, std::size_t target) {
  if (dim == 0 || points.size() % dim != 0) throw DimensionError("reduce_topdown: size is not a multiple of dim");
  const std::size_t n = points.size() / dim;
  if (target < 1 || n < target)
    throw SizeError("reduce_topdown: need 1 <= target <= collection size (" + std::to_string(n) + ")");

  std::vector<float> dist(n * n);
  kernels::omp::pairwise(points, dim, dist);
  std::vector<char> alive(n, 1);
  std::vector<float> nn_dist(n, kInf);
  std::vector<std::size_t> nn_idx(n, 0);

  const auto nearest_excluding = [&](std::size_t y, std::size_t skip) {
    float best = kInf;
    std::size_t arg = y;
    for (std::size_t z = 0; z < n; ++z)
      if (alive[z] && z != y && z != skip && dist[y * n + z] < best) {
        best = dist[y * n + z];
        arg = z;
      }
    return std::pair{best, arg};
  };
  for (std::size_t i = 0; i < n; ++i) std::tie(nn_dist[i], nn_idx[i]) = nearest_excluding(i, n);

  // Minimum pairwise distance that would remain, and the partner's new NN distance.
  const auto removal_quality = [&](std::size_t x, std::size_t partner) {
    float global = kInf;
    float partner_nn = kInf;
    for (std::size_t y = 0; y < n; ++y) {
      if (!alive[y] || y == x) continue;
      float d = nn_dist[y];
      if (nn_idx[y] == x) d = nearest_excluding(y, x).first;
      global = std::min(global, d);
      if (y == partner) partner_nn = d;
    }
    return std::pair{global, partner_nn};
  };

  for (std::size_t remaining = n; remaining > target; --remaining) {
    // Lexicographically smallest closest pair.
    std::size_t bi = n, bj = n;
    float best = kInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      const std::size_t j = nn_idx[i];
      const std::size_t a = std::min(i, j), b = std::max(i, j);
      if (nn_dist[i] < best || (nn_dist[i] == best && (a < bi || (a == bi && b < bj)))) {
        best = nn_dist[i];
        bi = a;
        bj = b;
      }
    }
    const auto qi = removal_quality(bi, bj);
    const auto qj = removal_quality(bj, bi);
    const std::size_t victim = qj > qi ? bj : bi;
    alive[victim] = 0;
    for (std::size_t y = 0; y < n; ++y)
      if (alive[y] && nn_idx[y] == victim) std::tie(nn_dist[y], nn_idx[y]) = nearest_excluding(y, n);
  }

  CoresetBank bank(target, dim);
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) bank.observe(points.subspan(i * dim, dim));
  bank.metadata()["reduced_from"] = n;
  return bank;
}

// ---------------------------------------------------------------------------
// Persistence

void save(const CoresetBank& bank, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic({kCoresetMagic, 4});
  w.u16(kCoresetVersion);
  w.u32(static_cast<std::uint32_t>(bank.capacity()));
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  w.u32(static_cast<std::uint32_t>(bank.fill()));
  w.f32s(bank.members());
  const bool have_matrix = bank.full() && bank.capacity() >= 2;
  for (std::size_t i = 0; i < bank.fill(); ++i)
    for (std::size_t j = 0; j < i; ++j) w.f32(have_matrix ? bank.distance(i, j) : 0.0f);
  const std::string meta = bank.metadata().dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.raw(meta);
  w.save(path);
}

CoresetBank load(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic({kCoresetMagic, 4});
  const std::uint16_t version = r.u16();
  if (version != kCoresetVersion)
    throw VersionError(path.string() + ": coreset version " + std::to_string(version) + " unsupported");
  const std::size_t capacity = r.u32(), dim = r.u32(), fill = r.u32();
  if (capacity == 0 || dim == 0 || fill > capacity) throw FormatError(path.string() + ": invalid coreset header");
  r.need(fill * dim * 4);
  std::vector<float> members(capacity * dim, 0.0f);
  for (std::size_t k = 0; k < fill * dim; ++k) members[k] = r.f32();
  std::vector<float> distances;
  const bool full = fill == capacity && capacity >= 2;
  r.need(fill * (fill - (fill > 0 ? 1 : 0)) / 2 * 4);
  if (full) distances.assign(capacity * capacity, 0.0f);
  for (std::size_t i = 0; i < fill; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const float d = r.f32();
      if (full) {
        distances[i * capacity + j] = d;
        distances[j * capacity + i] = d;
      }
    }
  const std::uint32_t meta_len = r.u32();
  const std::string meta = r.raw(meta_len);
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  Json metadata;
  try {
    metadata = Json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad metadata: " + e.what());
  }
  return CoresetBank::restore(capacity, dim, std::move(members), fill, std::move(distances), std::move(metadata));
}

}  // namespace seqcore
