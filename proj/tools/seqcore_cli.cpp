// seqcore command-line frontend: synth, train, meld, score, eval.
//
// Exit codes: 0 ok, 2 config error, 3 io error, 4 data/shape error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqcore/pipeline.hpp"

namespace fs = std::filesystem;
using namespace seqcore;

namespace {

std::optional<bool> parse_stains(const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  if (v == "any") return std::nullopt;
  throw ConfigError("--stains expects on, off or any");
}

void summary(const std::string& stage, const Json& fields) {
  std::string line = "summary stage=" + stage;
  for (const auto& [k, v] : fields.items()) line += " " + k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  std::cout << line << std::endl;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::data: return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential coreset anomaly segmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* cmd) { cmd->add_option("--config", config_path, "pipeline config (JSON)"); };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic plate dataset");
  add_config(synth);
  std::string synth_out;
  std::optional<std::size_t> count, val_count, test_count;
  bool paired = false, dr = false;
  std::string stains_flag;
  std::optional<std::uint64_t> seed;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", count, "train samples");
  synth->add_option("--val-count", val_count, "defected validation samples");
  synth->add_option("--test-count", test_count, "defected test samples");
  synth->add_flag("--paired", paired, "emit clean and stained twins");
  synth->add_option("--stains", stains_flag, "on|off");
  synth->add_flag("--dr", dr, "domain randomization (three light variants)");
  synth->add_option("--seed", seed, "dataset seed");

  // train
  auto* train = app.add_subcommand("train", "fit a sequential coreset on the train split");
  add_config(train);
  std::string data_dir, train_out, train_stains;
  std::optional<std::size_t> epochs, capacity, chunk;
  bool resume = false;
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", train_out, "coreset file")->required();
  train->add_option("--stains", train_stains, "on|off|any: train-split filter");
  train->add_option("--epochs", epochs, "maximum epochs");
  train->add_option("--capacity", capacity, "coreset size");
  train->add_option("--chunk", chunk, "patches per batch");
  train->add_flag("--resume", resume, "continue from an existing coreset file");

  // meld
  auto* meld_cmd = app.add_subcommand("meld", "meld coresets into one");
  std::vector<std::string> meld_inputs;
  std::size_t meld_size = 0;
  std::string meld_out;
  meld_cmd->add_option("inputs", meld_inputs, "coreset files")->required();
  meld_cmd->add_option("--size", meld_size, "target capacity")->required();
  meld_cmd->add_option("--out", meld_out, "output coreset file")->required();

  // score
  auto* score = app.add_subcommand("score", "anomaly maps and masks for a split");
  add_config(score);
  std::string coreset_path, score_out, split, estimate_on;
  std::optional<double> threshold;
  score->add_option("--coreset", coreset_path, "coreset file")->required();
  score->add_option("--data", data_dir, "dataset directory")->required();
  score->add_option("--out", score_out, "output directory")->required();
  std::string score_stains;
  score->add_option("--split", split, "split to score");
  std::string estimate_stains;
  score->add_option("--stains", score_stains, "on|off|any: filter on scored images");
  score->add_option("--estimate-stains", estimate_stains, "on|off|any: filter on validation images");
  auto* thr = score->add_option("--threshold", threshold, "fixed threshold");
  score->add_option("--estimate-on", estimate_on, "split used to estimate the threshold")->excludes(thr);
  score->add_option("--chunk", chunk, "queries per nearest-neighbour chunk");

  // eval
  auto* eval = app.add_subcommand("eval", "metrics report for predicted masks");
  add_config(eval);
  std::string pred_dir, eval_out;
  bool sweep = false, overlays = false;
  std::optional<double> coverage;
  eval->add_option("--pred", pred_dir, "score output directory")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_option("--split", split, "split to evaluate");
  eval->add_option("--stains", score_stains, "on|off|any: filter on evaluated images");
  eval->add_flag("--sweep", sweep, "coverage-threshold sweep");
  eval->add_option("--coverage", coverage, "coverage threshold in percent");
  eval->add_flag("--overlays", overlays, "write TP/FP/FN overlays");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);

    if (*synth) {
      if (count) config.dataset.count = *count;
      if (val_count) config.dataset.val_count = *val_count;
      if (test_count) config.dataset.test_count = *test_count;
      if (paired) config.dataset.paired = true;
      if (!stains_flag.empty()) {
        const auto s = parse_stains(stains_flag);
        if (!s) throw ConfigError("synth --stains expects on or off");
        config.dataset.stains = *s;
      }
      if (dr) config.dataset.domain_randomization = true;
      if (seed) config.dataset.seed = *seed;
      const auto r = run_synth(config, synth_out);
      summary("synth", {{"samples", r.manifest.samples.size()}, {"out", synth_out}});
    } else if (*train) {
      if (!train_stains.empty()) config.train.stains = parse_stains(train_stains);
      if (epochs) config.coreset.max_epochs = *epochs;
      if (capacity) config.coreset.capacity = *capacity;
      if (chunk) config.coreset.chunk = *chunk;
      const auto r = run_train(config, data_dir, train_out, resume);
      const auto& last = r.fit.epochs.back();
      summary("train", {{"images", r.images},
                        {"epochs", r.fit.epochs.size()},
                        {"converged", r.fit.converged},
                        {"last_replaced", last.replaced},
                        {"d_m", r.fit.final_d_m},
                        {"peak_vectors", r.peak_vectors},
                        {"out", train_out}});
    } else if (*meld_cmd) {
      std::vector<fs::path> inputs(meld_inputs.begin(), meld_inputs.end());
      const auto bank = run_meld(inputs, meld_size, meld_out);
      summary("meld", {{"sources", inputs.size()}, {"fill", bank.fill()}, {"out", meld_out}});
    } else if (*score) {
      if (!split.empty()) config.score.split = split;
      if (threshold) config.score.threshold = *threshold;
      if (!estimate_on.empty()) {
        config.score.threshold.reset();
        config.score.estimate_on = estimate_on;
      }
      if (chunk) config.coreset.chunk = *chunk;
      if (!score_stains.empty()) config.score.stains = parse_stains(score_stains);
      if (!estimate_stains.empty()) config.score.estimate_stains = parse_stains(estimate_stains);
      const auto r = run_score(config, coreset_path, data_dir, score_out);
      Json f{{"images", r.images}, {"threshold", r.threshold}, {"out", score_out}};
      if (r.estimate) f["f1"] = r.estimate->achieved_f1;
      summary("score", f);
    } else if (*eval) {
      if (!split.empty()) config.score.split = split;
      if (sweep) config.metrics.sweep = true;
      if (overlays) config.metrics.overlays = true;
      if (coverage) config.metrics.coverage_threshold = *coverage;
      if (!score_stains.empty()) config.score.stains = parse_stains(score_stains);
      const auto r = run_eval(config, pred_dir, data_dir, eval_out);
      summary("eval", {{"images", r.images},
                       {"precision", r.pixel.precision},
                       {"recall", r.pixel.recall},
                       {"f1", r.pixel.f1},
                       {"mR_dw", r.defectwise.mean_defect ? Json(*r.defectwise.mean_defect) : Json(nullptr)},
                       {"out", eval_out}});
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
