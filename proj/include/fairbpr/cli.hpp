#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairbpr/dataset.hpp"
#include "fairbpr/eval.hpp"
#include "fairbpr/model.hpp"
#include "fairbpr/sampling.hpp"

namespace fairbpr::cli {

struct RunConfig {
  std::filesystem::path interactions;
  std::filesystem::path providers;
  std::string sep = "\t";
  std::size_t min_item = 0;
  std::size_t min_user = 0;
  double test_frac = 0.2;
  double val_frac = 0.2;
  TrainConfig train;
  std::vector<std::size_t> ks = {10, 20};
  std::uint64_t seed = 0;
  std::string dataset;       // run label; defaults to the interactions file stem
  std::string report_group;  // group in sweep tables; defaults to the catalog minority
  std::filesystem::path out = "out";
  std::filesystem::path split_dir;   // defaults to `out`
  std::filesystem::path checkpoint;  // defaults to `out`/model.ckpt

  // Fills defaults, propagates the seed and checks invariants. Throws ConfigError.
  void resolve();
  std::filesystem::path split_path() const { return split_dir.empty() ? out : split_dir; }
  std::filesystem::path checkpoint_path() const {
    return checkpoint.empty() ? out / "model.ckpt" : checkpoint;
  }
};

// Everything that influences results; output locations are left out so that
// runs written to different directories stay byte-identical.
nlohmann::json to_json(const RunConfig& config);

struct Prepared {
  DatasetSplit split;
  Catalog catalog;
};

// Loads, filters and splits; writes train/validation/test.tsv plus stats.json
// and stats.csv under `out`.
Prepared cmd_prepare(const RunConfig& config);

// Reads the split written by cmd_prepare and the provider file.
Prepared load_prepared(const RunConfig& config);

// Writes the checkpoint and train_log.json next to it.
TrainResult cmd_train(const RunConfig& config);

// Writes metrics.json and metrics.csv under `out`. Picks up the triplet audit
// from train_log.json beside the checkpoint when present.
MetricsReport cmd_evaluate(const RunConfig& config);

// Samples n triplets without training; writes audit.json (and the triplets
// when `dump` is non-empty).
CompositionAudit cmd_audit(const RunConfig& config, std::size_t n,
                           const std::filesystem::path& dump = {});

struct SweepRow {
  std::string dataset;
  TargetSlot slot = TargetSlot::kNone;
  double cost = 1.0;
  std::string status = "ok";
  MetricsReport report;
};

struct SweepResult {
  std::string group;  // reported group
  std::vector<SweepRow> rows;
  bool all_ok() const;
};

// Prepares once, then trains and evaluates a C=1 baseline plus every
// (slot, C != 1) pair. Writes `<out>/<dataset>_<slot>_C<value>/` run
// directories and `<out>/sweep.csv`. Failed runs are kept with their error.
SweepResult cmd_sweep(const RunConfig& config, const std::vector<double>& costs,
                      const std::vector<TargetSlot>& slots);

std::string sweep_csv(const SweepResult& sweep, const std::vector<std::size_t>& ks);
std::string format_cost(double cost);
std::string run_dir_name(const std::string& dataset, TargetSlot slot, double cost);

// Entry point for the `fairbpr` executable.
int run(int argc, char** argv);

}  // namespace fairbpr::cli
