#include "seqcore/pipeline.hpp"

#include <fstream>
#include <iterator>
#include <map>

#include "seqcore/png_io.hpp"
#include "seqcore/random.hpp"

namespace seqcore {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  dataset.validate();
  extractor.validate();
  if (extractor.kind == ExtractorKind::external)
    throw ConfigError("pipeline: the external extractor cannot featurize dataset images");
  if (coreset.capacity < 1) throw ConfigError("coreset.capacity must be >= 1");
  if (coreset.chunk < 1) throw ConfigError("coreset.chunk must be >= 1");
  if (coreset.max_epochs < 1) throw ConfigError("coreset.max_epochs must be >= 1");
  if (train.augment) train.augment->validate();
  if (!(blur.sigma >= 0.0)) throw ConfigError("blur.sigma must be >= 0");
  if (score.threshold && !std::isfinite(*score.threshold)) throw ConfigError("score.threshold must be finite");
  if (!(metrics.coverage_threshold >= 0.0 && metrics.coverage_threshold <= 100.0))
    throw ConfigError("metrics.coverage_threshold must lie in [0, 100]");
}

Json to_json(const PipelineConfig& c) {
  return Json{
      {"dataset", to_json(c.dataset)},
      {"extractor", to_json(c.extractor)},
      {"coreset", {{"capacity", c.coreset.capacity}, {"chunk", c.coreset.chunk}, {"max_epochs", c.coreset.max_epochs}}},
      {"train",
       {{"stains", c.train.stains ? Json(*c.train.stains) : Json(nullptr)},
        {"augment", c.train.augment ? to_json(*c.train.augment) : Json(nullptr)},
        {"augment_seed", c.train.augment_seed}}},
      {"blur", {{"sigma", c.blur.sigma}, {"kernel", c.blur.kernel}}},
      {"score",
       {{"threshold", c.score.threshold ? Json(*c.score.threshold) : Json(nullptr)},
        {"estimate_on", c.score.estimate_on},
        {"split", c.score.split},
        {"stains", c.score.stains ? Json(*c.score.stains) : Json(nullptr)},
        {"estimate_stains", c.score.estimate_stains ? Json(*c.score.estimate_stains) : Json(nullptr)},
        {"max_candidates", c.score.max_candidates}}},
      {"metrics",
       {{"coverage_threshold", c.metrics.coverage_threshold},
        {"sweep", c.metrics.sweep},
        {"overlays", c.metrics.overlays}}}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  StrictObject o(j, "config");
  PipelineConfig c;
  if (o.has("dataset")) c.dataset = dataset_config_from_json(o.at("dataset"));
  if (o.has("extractor")) c.extractor = extractor_spec_from_json(o.at("extractor"));
  if (o.has("coreset")) {
    StrictObject s(o.at("coreset"), "config.coreset");
    s.read("capacity", c.coreset.capacity);
    s.read("chunk", c.coreset.chunk);
    s.read("max_epochs", c.coreset.max_epochs);
    s.finish();
  }
  if (o.has("train")) {
    StrictObject s(o.at("train"), "config.train");
    if (s.has("stains") && !s.at("stains").is_null()) {
      bool v = false;
      s.read("stains", v);
      c.train.stains = v;
    }
    if (s.has("augment") && !s.at("augment").is_null()) c.train.augment = augment_policy_from_json(s.at("augment"));
    s.read("augment_seed", c.train.augment_seed);
    s.finish();
  }
  if (o.has("blur")) {
    StrictObject s(o.at("blur"), "config.blur");
    s.read("sigma", c.blur.sigma);
    s.read("kernel", c.blur.kernel);
    s.finish();
  }
  if (o.has("score")) {
    StrictObject s(o.at("score"), "config.score");
    if (s.has("threshold") && !s.at("threshold").is_null()) {
      double t = 0.0;
      s.read("threshold", t);
      c.score.threshold = t;
    }
    s.read("estimate_on", c.score.estimate_on);
    s.read("split", c.score.split);
    if (s.has("stains") && !s.at("stains").is_null()) {
      bool v = false;
      s.read("stains", v);
      c.score.stains = v;
    }
    if (s.has("estimate_stains") && !s.at("estimate_stains").is_null()) {
      bool v = false;
      s.read("estimate_stains", v);
      c.score.estimate_stains = v;
    }
    s.read("max_candidates", c.score.max_candidates);
    s.finish();
  }
  if (o.has("metrics")) {
    StrictObject s(o.at("metrics"), "config.metrics");
    s.read("coverage_threshold", c.metrics.coverage_threshold);
    s.read("sweep", c.metrics.sweep);
    s.read("overlays", c.metrics.overlays);
    s.finish();
  }
  o.finish();
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_run(const fs::path& path, const std::string& command, const Json& config,
               const std::map<std::string, std::string>& inputs) {
  Json j{{"command", command}, {"config", config}, {"inputs", inputs}};
  write_text(path, j.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path run_file_for(const fs::path& out_file) {
  fs::path p = out_file;
  p += ".run.json";
  return p;
}

}  // namespace

std::string file_hash(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return hex64(fnv1a64(bytes));
}

// ---------------------------------------------------------------------------
// Image stream

Image load_image(const fs::path& path) { return png::dequantize(png::read_gray8(path)); }

ImageStream::ImageStream(fs::path dataset_dir, std::vector<ManifestEntry> entries, ExtractorSpec spec,
                         std::optional<AugmentPolicy> policy, std::uint64_t augment_seed, std::size_t chunk)
    : dir_(std::move(dataset_dir)),
      entries_(std::move(entries)),
      spec_(std::move(spec)),
      policy_(std::move(policy)),
      seed_(augment_seed),
      chunk_(chunk) {
  if (entries_.empty()) throw DimensionError("train stream: no images selected");
  if (chunk_ < 1) throw ConfigError("chunk must be >= 1");
  if (policy_ && policy_->is_identity()) policy_.reset();
  // Dimension and per-epoch size come from the first image; all share one shape.
  const FeatureMap probe = featurize(0);
  dim_ = probe.dim();
  patches_per_epoch_ = probe.patches() * entries_.size();
}

FeatureMap ImageStream::featurize(std::size_t index) const {
  Image image = load_image(dir_ / entries_[index].image_path);
  if (policy_) {
    const ClassMask classes(image.height(), image.width());
    const InstanceMask instances(image.height(), image.width());
    image = augment(image, classes, instances, *policy_, augment_seed(seed_, index, epoch_)).image;
  }
  return extract(image, spec_);
}

void ImageStream::begin_epoch(std::size_t epoch) {
  epoch_ = epoch;
  next_image_ = 0;
  pending_.clear();
  pending_.shrink_to_fit();
  pending_pos_ = 0;
  pending_tracked_ = TrackedVectors();
}

bool ImageStream::next(PatchBatch& batch) {
  batch = PatchBatch();  // release the previous batch before the next one is built
  if (pending_pos_ * dim_ >= pending_.size()) {
    pending_tracked_ = TrackedVectors();
    pending_.clear();
    pending_.shrink_to_fit();
    pending_pos_ = 0;
    if (next_image_ >= entries_.size()) return false;
    FeatureMap map = featurize(next_image_++);
    if (map.dim() != dim_) throw DimensionError("train stream: images yield different feature dimensions");
    pending_ = std::move(map.values());
    if (pending_.size() / dim_ <= chunk_) {
      // Whole image fits one chunk: hand the buffer over without a copy.
      batch = PatchBatch(std::move(pending_), dim_);
      pending_ = {};
      return true;
    }
    pending_tracked_ = TrackedVectors(pending_.size() / dim_);
  }
  const std::size_t rows = pending_.size() / dim_;
  const std::size_t n = std::min(chunk_, rows - pending_pos_);
  batch = PatchBatch(n, dim_);
  std::copy_n(pending_.begin() + static_cast<std::ptrdiff_t>(pending_pos_ * dim_), n * dim_, batch.storage().begin());
  pending_pos_ += n;
  return true;
}

std::vector<ManifestEntry> split_entries(const DatasetManifest& manifest, const std::string& split,
                                         std::optional<bool> has_stains) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry* e : manifest.select(split, has_stains)) out.push_back(*e);
  return out;
}

// ---------------------------------------------------------------------------
// Commands

SynthResult run_synth(const PipelineConfig& config, const fs::path& out_dir) {
  config.validate();
  SynthResult r{generate_dataset(config.dataset, out_dir)};
  write_run(out_dir / "run.json", "synth", to_json(config), {});
  return r;
}

TrainResult run_train(const PipelineConfig& config, const fs::path& dataset_dir, const fs::path& out, bool resume) {
  config.validate();
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const auto entries = split_entries(manifest, "train", config.train.stains);
  if (entries.empty()) throw DimensionError("train: the train split selection is empty");

  std::map<std::string, std::string> inputs{{"manifest.json", file_hash(dataset_dir / "manifest.json")}};
  for (const auto& e : entries) inputs[e.image_path] = file_hash(dataset_dir / e.image_path);

  ImageStream stream(dataset_dir, entries, config.extractor, config.train.augment, config.train.augment_seed,
                     config.coreset.chunk);

  const std::string ext_hash = config.extractor.hash();
  std::optional<CoresetBank> bank;
  if (resume && fs::exists(out)) {
    bank.emplace(load(out));
    if (bank->dim() != stream.dim() || bank->capacity() != config.coreset.capacity)
      throw DimensionError("train: checkpoint shape does not match the config");
    if (bank->extractor_hash() != ext_hash) throw MixedExtractorError("train: checkpoint uses another extractor");
  } else {
    bank.emplace(config.coreset.capacity, stream.dim());
    bank->metadata()["extractor_hash"] = ext_hash;
    bank->metadata()["extractor"] = to_json(config.extractor);
    bank->metadata()["seed"] = config.train.augment_seed;
  }

  ensure_dir(out.has_parent_path() ? out.parent_path() : fs::path("."));
  TrainResult result;
  result.images = entries.size();
  VectorProbe::reset_peak();
  for (;;) {
    const std::size_t done = epoch_history(*bank).size();
    if (done >= config.coreset.max_epochs) break;
    result.fit = fit(*bank, stream, done + 1);
    save(*bank, out);
    if (result.fit.converged) break;
  }
  result.fit = fit(*bank, stream, 0);  // history only; runs nothing
  result.peak_vectors = VectorProbe::peak();
  write_run(run_file_for(out), "train", to_json(config), inputs);
  return result;
}

CoresetBank run_meld(const std::vector<fs::path>& inputs, std::size_t size, const fs::path& out) {
  if (inputs.empty()) throw ConfigError("meld: no input coresets");
  std::vector<CoresetBank> banks;
  std::map<std::string, std::string> hashes;
  for (const auto& p : inputs) {
    banks.push_back(load(p));
    hashes[p.filename().string()] = file_hash(p);
  }
  std::vector<const CoresetBank*> ptrs;
  for (const auto& b : banks) ptrs.push_back(&b);
  CoresetBank melded = meld(ptrs, size);
  ensure_dir(out.has_parent_path() ? out.parent_path() : fs::path("."));
  save(melded, out);
  write_run(run_file_for(out), "meld", Json{{"size", size}}, hashes);
  return melded;
}

std::vector<AnomalyMap> score_split(const PipelineConfig& config, const CoresetBank& bank, const fs::path& dataset_dir,
                                    const std::vector<ManifestEntry>& entries) {
  std::vector<AnomalyMap> maps;
  maps.reserve(entries.size());
  for (const auto& e : entries) {
    const Image image = load_image(dataset_dir / e.image_path);
    const FeatureMap fm = extract(image, config.extractor);
    maps.push_back(score_map(fm, bank, image.height(), image.width(), config.blur, config.coreset.chunk));
  }
  return maps;
}

namespace {

std::vector<BinaryMask> truth_masks(const fs::path& dataset_dir, const std::vector<ManifestEntry>& entries) {
  std::vector<BinaryMask> out;
  for (const auto& e : entries) out.push_back(defect_mask(png::read_gray8(dataset_dir / e.class_mask_path)));
  return out;
}

Grid<std::uint8_t> mask_png(const BinaryMask& m) {
  Grid<std::uint8_t> out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 255 : 0;
  return out;
}

}  // namespace

ScoreResult run_score(const PipelineConfig& config, const fs::path& coreset_path, const fs::path& dataset_dir,
                      const fs::path& out_dir) {
  config.validate();
  const CoresetBank bank = load(coreset_path);
  if (bank.extractor_hash() != config.extractor.hash())
    throw MixedExtractorError("score: coreset was built with a different extractor");
  const DatasetManifest manifest = load_manifest(dataset_dir);
  std::map<std::string, std::string> inputs{{"coreset", file_hash(coreset_path)},
                                            {"manifest.json", file_hash(dataset_dir / "manifest.json")}};

  ScoreResult result;
  if (config.score.threshold) {
    result.threshold = *config.score.threshold;
  } else {
    const auto val = split_entries(manifest, config.score.estimate_on, config.score.estimate_stains);
    if (val.empty()) throw EmptyValidationError("score: split '" + config.score.estimate_on + "' is empty");
    const auto maps = score_split(config, bank, dataset_dir, val);
    const auto truth = truth_masks(dataset_dir, val);
    result.estimate = estimate_threshold(maps, truth, config.score.max_candidates);
    result.threshold = result.estimate->value;
    for (const auto& e : val) inputs[e.image_path] = file_hash(dataset_dir / e.image_path);
  }

  const auto entries = split_entries(manifest, config.score.split, config.score.stains);
  ensure_dir(out_dir / "maps");
  ensure_dir(out_dir / "masks");
  const auto maps = score_split(config, bank, dataset_dir, entries);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& id = entries[k].id;
    inputs[entries[k].image_path] = file_hash(dataset_dir / entries[k].image_path);
    save_anomaly_map(maps[k], out_dir / "maps" / (id + ".sqam"));
    save_anomaly_png(maps[k], out_dir / "maps" / (id + ".png"));
    png::write_gray8(out_dir / "masks" / (id + ".png"), mask_png(binarize(maps[k].scores, result.threshold)));
  }
  result.images = entries.size();

  Json t{{"threshold", result.threshold}, {"coreset_hash", bank.content_hash()}};
  if (result.estimate) {
    t["estimated_on"] = config.score.estimate_on;
    t["achieved_f1"] = result.estimate->achieved_f1;
    t["sweep_size"] = result.estimate->sweep_size;
  }
  write_text(out_dir / "threshold.json", t.dump(2) + "\n");
  write_run(out_dir / "run.json", "score", to_json(config), inputs);
  return result;
}

MetricsReport run_eval(const PipelineConfig& config, const fs::path& pred_dir, const fs::path& dataset_dir,
                       const fs::path& out_dir) {
  config.validate();
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const auto entries = split_entries(manifest, config.score.split, config.score.stains);
  MetricsAccumulator acc(config.metrics.coverage_threshold, config.metrics.sweep);
  std::map<std::string, std::string> inputs{{"manifest.json", file_hash(dataset_dir / "manifest.json")}};
  ensure_dir(out_dir);
  if (config.metrics.overlays) ensure_dir(out_dir / "overlays");
  for (const auto& e : entries) {
    const fs::path pred_path = pred_dir / "masks" / (e.id + ".png");
    inputs["masks/" + e.id + ".png"] = file_hash(pred_path);
    const auto raw = png::read_gray8(pred_path);
    BinaryMask pred(raw.height(), raw.width());
    for (std::size_t i = 0; i < raw.size(); ++i) pred[i] = raw[i] ? 1 : 0;
    const ClassMask classes = png::read_gray8(dataset_dir / e.class_mask_path);
    const InstanceMask instances = png::read_gray16(dataset_dir / e.instance_mask_path);
    acc.add(pred, classes, instances);
    if (config.metrics.overlays)
      png::write_rgb(out_dir / "overlays" / (e.id + ".png"),
                     overlay(load_image(dataset_dir / e.image_path), pred, defect_mask(classes)));
  }
  const MetricsReport report = acc.report();
  write_text(out_dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(out_dir / "report.csv", to_csv(report));
  write_run(out_dir / "run.json", "eval", to_json(config), inputs);
  return report;
}

}  // namespace seqcore
