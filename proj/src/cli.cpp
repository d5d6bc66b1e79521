#include "fairbpr/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fairbpr/errors.hpp"

namespace fairbpr::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kSplitSep = "\t";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failure on " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) {
    throw IoError(std::string(what) + " file not found: " + path.string());
  }
}

std::string majority_group(const Catalog& catalog) {
  std::string best;
  double best_share = -1.0;
  for (const auto& [group, share] : catalog.group_share) {
    if (share > best_share) {
      best = group;
      best_share = share;
    }
  }
  return best;
}

// Negative slot defaults to emphasizing the majority, positive slot the minority.
RunConfig with_resolved_group(RunConfig config, const Catalog& catalog) {
  auto& sampler = config.train.sampler;
  if (sampler.target_slot != TargetSlot::kNone && sampler.emphasized_group.empty()) {
    sampler.emphasized_group = sampler.target_slot == TargetSlot::kNegative
                                   ? majority_group(catalog)
                                   : catalog.minority_group();
  }
  if (config.report_group.empty()) config.report_group = catalog.minority_group();
  return config;
}

std::string parse_sep(std::string text) {
  if (text == "tab" || text == "\\t") return "\t";
  if (text == "comma") return ",";
  return text;
}

}  // namespace

void RunConfig::resolve() {
  if (dataset.empty()) dataset = interactions.stem().string();
  if (dataset.empty()) dataset = "data";
  train.seed = seed;
  train.sampler.seed = derive_seed(seed, 1);
  if (sep.empty()) throw ConfigError("empty separator");
  if (!(test_frac >= 0.0) || !(val_frac >= 0.0) || !(test_frac + val_frac < 1.0)) {
    throw ConfigError("split fractions need 0 <= test + val < 1");
  }
  if (ks.empty()) throw ConfigError("at least one cutoff k is required");
  for (const auto k : ks) {
    if (k == 0) throw ConfigError("cutoffs must be >= 1");
  }
  // The emphasized group may be left empty here; it is filled from the
  // catalog once the provider file is read.
  auto check = train;
  if (check.sampler.emphasized_group.empty()) check.sampler.emphasized_group = "?";
  check.validate();
}

nlohmann::json to_json(const RunConfig& config) {
  return {
      {"interactions", config.interactions.string()},
      {"providers", config.providers.string()},
      {"sep", config.sep},
      {"min_item", config.min_item},
      {"min_user", config.min_user},
      {"test_frac", config.test_frac},
      {"val_frac", config.val_frac},
      {"train", to_json(config.train)},
      {"k", config.ks},
      {"seed", config.seed},
      {"dataset", config.dataset},
      {"report_group", config.report_group},
  };
}

Prepared cmd_prepare(const RunConfig& config) {
  require_file(config.interactions, "interactions");
  require_file(config.providers, "providers");
  auto rows = load_interactions(config.interactions, config.sep);
  auto providers = load_provider_groups(config.providers, config.sep);
  rows = filter_min_interactions(rows, config.min_item, config.min_user);
  Prepared prepared{temporal_split(rows, config.test_frac, config.val_frac),
                    std::move(providers.catalog)};

  ensure_dir(config.out);
  save_interactions(config.out / "train.tsv", prepared.split.train, kSplitSep);
  save_interactions(config.out / "validation.tsv", prepared.split.validation, kSplitSep);
  save_interactions(config.out / "test.tsv", prepared.split.test, kSplitSep);

  const auto stats = catalog_stats(prepared.split, prepared.catalog);
  auto j = to_json(stats);
  j["config"] = to_json(with_resolved_group(config, prepared.catalog));
  write_json(config.out / "stats.json", j);
  auto groups = prepared.catalog.labeled_groups();
  if (stats.train_group_share.count(std::string(kUnknownGroup))) {
    groups.emplace_back(kUnknownGroup);
  }
  write_text(config.out / "stats.csv", to_csv(stats, groups));
  return prepared;
}

Prepared load_prepared(const RunConfig& config) {
  require_file(config.providers, "providers");
  const auto dir = config.split_path();
  for (const char* name : {"train.tsv", "validation.tsv", "test.tsv"}) {
    if (!fs::is_regular_file(dir / name)) {
      throw IoError("prepared split missing " + (dir / name).string() + " (run prepare first)");
    }
  }
  Prepared prepared;
  prepared.split.train = load_interactions(dir / "train.tsv", kSplitSep);
  prepared.split.validation = load_interactions(dir / "validation.tsv", kSplitSep);
  prepared.split.test = load_interactions(dir / "test.tsv", kSplitSep);
  prepared.catalog = load_provider_groups(config.providers, config.sep).catalog;
  return prepared;
}

TrainResult cmd_train(const RunConfig& base) {
  const auto prepared = load_prepared(base);
  const auto config = with_resolved_group(base, prepared.catalog);
  auto result = train(prepared.split, prepared.catalog, config.train);

  const auto ckpt = config.checkpoint_path();
  if (ckpt.has_parent_path()) ensure_dir(ckpt.parent_path());
  const auto echo = to_json(config);
  save_checkpoint(ckpt, result.model, echo);
  write_json(ckpt.parent_path() / "train_log.json", {{"epoch_loss", result.epoch_loss},
                                                      {"triplet_audit", to_json(result.audit)},
                                                      {"config", echo}});
  return result;
}

MetricsReport cmd_evaluate(const RunConfig& base) {
  const auto prepared = load_prepared(base);
  const auto config = with_resolved_group(base, prepared.catalog);
  nlohmann::json train_config;
  const auto model = load_checkpoint(config.checkpoint_path(), &train_config);

  CompositionAudit audit;
  const auto log_path = config.checkpoint_path().parent_path() / "train_log.json";
  if (fs::is_regular_file(log_path)) {
    std::ifstream in(log_path);
    const auto log = nlohmann::json::parse(in, nullptr, false);
    if (!log.is_discarded() && log.contains("triplet_audit")) {
      const auto& a = log["triplet_audit"];
      audit.triplets = a.value("triplets", std::size_t{0});
      const auto groups = a.value("groups", nlohmann::json::object());
      for (const auto& [group, c] : groups.items()) {
        audit.counts[group] = {c.value("positive_count", std::size_t{0}),
                               c.value("negative_count", std::size_t{0})};
      }
    }
  }

  const nlohmann::json echo = {{"run", to_json(config)}, {"checkpoint", train_config}};
  auto report = fairness_report(model, prepared.split, prepared.catalog, config.ks, audit, echo);
  ensure_dir(config.out);
  write_json(config.out / "metrics.json", to_json(report));
  write_text(config.out / "metrics.csv", to_csv(report));
  return report;
}

CompositionAudit cmd_audit(const RunConfig& base, std::size_t n, const fs::path& dump) {
  const auto prepared = load_prepared(base);
  const auto config = with_resolved_group(base, prepared.catalog);
  const TrainIndex index(prepared.split.train);
  TripletSampler sampler(index, prepared.catalog, config.train.sampler);
  const auto triplets = sampler.next_epoch(n);
  const auto audit = triplet_composition_audit(triplets, index, prepared.catalog);

  ensure_dir(config.out);
  auto j = to_json(audit);
  j["config"] = to_json(config);
  write_json(config.out / "audit.json", j);
  if (!dump.empty()) dump_triplets(dump, triplets, index);
  return audit;
}

bool SweepResult::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == "ok"; });
}

std::string format_cost(double cost) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), cost);
  return std::string(buf, end);
}

std::string run_dir_name(const std::string& dataset, TargetSlot slot, double cost) {
  return dataset + "_" + to_string(slot) + "_C" + format_cost(cost);
}

SweepResult cmd_sweep(const RunConfig& base, const std::vector<double>& costs,
                      const std::vector<TargetSlot>& slots) {
  if (costs.empty()) throw ConfigError("sweep needs at least one cost");
  for (const auto c : costs) {
    if (!(c >= 1.0)) throw ConfigError("sweep cost " + format_cost(c) + " is below 1");
  }
  if (slots.empty()) throw ConfigError("sweep needs at least one slot");

  RunConfig prep = base;
  const auto prepared = cmd_prepare(prep);

  SweepResult sweep;
  sweep.group = with_resolved_group(base, prepared.catalog).report_group;

  std::vector<std::pair<TargetSlot, double>> settings = {{TargetSlot::kNone, 1.0}};
  for (const auto slot : slots) {
    if (slot == TargetSlot::kNone) continue;
    for (const auto c : costs) {
      if (c != 1.0) settings.emplace_back(slot, c);
    }
  }

  for (const auto& [slot, cost] : settings) {
    SweepRow row{base.dataset, slot, cost, "ok", {}};
    RunConfig run = base;
    run.out = base.out / run_dir_name(base.dataset, slot, cost);
    run.split_dir = base.out;
    run.checkpoint.clear();
    run.train.sampler.target_slot = slot;
    run.train.sampler.cost = cost;
    if (slot == TargetSlot::kNone) run.train.sampler.emphasized_group.clear();
    try {
      ensure_dir(run.out);
      cmd_train(run);
      row.report = cmd_evaluate(run);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    sweep.rows.push_back(std::move(row));
  }

  ensure_dir(base.out);
  write_text(base.out / "sweep.csv", sweep_csv(sweep, base.ks));
  return sweep;
}

std::string sweep_csv(const SweepResult& sweep, const std::vector<std::size_t>& ks) {
  const auto& g = sweep.group;
  std::ostringstream out;
  out.precision(17);
  out << "dataset,slot,cost";
  for (const auto k : ks) out << ",ndcg@" << k;
  out << ",pos_share_" << g << ",neg_share_" << g;
  for (const auto k : ks) out << ",slot_share@" << k << '_' << g;
  for (const auto k : ks) out << ",weighted_exposure@" << k << '_' << g;
  out << ",status\n";

  auto share = [&](const std::map<std::size_t, GroupShares>& m, std::size_t k) {
    const auto it = m.find(k);
    if (it == m.end()) return 0.0;
    const auto jt = it->second.find(g);
    return jt == it->second.end() ? 0.0 : jt->second;
  };
  for (const auto& row : sweep.rows) {
    const bool ok = row.status == "ok";
    out << row.dataset << ',' << to_string(row.slot) << ',' << format_cost(row.cost);
    for (const auto k : ks) {
      out << ',';
      if (ok) out << row.report.ndcg.at(k);
    }
    out << ',';
    if (ok) out << row.report.triplet_audit.positive_share(g);
    out << ',';
    if (ok) out << row.report.triplet_audit.negative_share(g);
    for (const auto k : ks) {
      out << ',';
      if (ok) out << share(row.report.slot_share, k);
    }
    for (const auto k : ks) {
      out << ',';
      if (ok) out << share(row.report.weighted_exposure, k);
    }
    // Status text may carry commas.
    std::string status = row.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << ',' << status << '\n';
  }
  return out.str();
}

int run(int argc, char** argv) {
  CLI::App app{"Cost-sensitive triplet sampling for BPR-MF with provider-group exposure metrics"};
  app.set_config("--config", "", "Flat key = value file mirroring the flags");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig config;
  std::string sep = "tab";
  std::string slot = "none";
  std::string user_draw = "uniform";
  std::string triplets = "auto";

  app.add_option("--interactions", config.interactions, "user<sep>item<sep>rating<sep>timestamp");
  app.add_option("--providers", config.providers, "item<sep>provider<sep>group");
  app.add_option("--sep", sep, "Field separator (tab, comma or literal, e.g. ::)")
      ->capture_default_str();
  app.add_option("--min-item", config.min_item, "Minimum interactions per item")
      ->capture_default_str();
  app.add_option("--min-user", config.min_user, "Minimum interactions per user")
      ->capture_default_str();
  app.add_option("--test-frac", config.test_frac)->capture_default_str();
  app.add_option("--val-frac", config.val_frac)->capture_default_str();
  app.add_option("--dim", config.train.dim)->capture_default_str();
  app.add_option("--epochs", config.train.epochs)->capture_default_str();
  app.add_option("--lr", config.train.learning_rate)->capture_default_str();
  app.add_option("--l2", config.train.l2_reg)->capture_default_str();
  app.add_option("--cost", config.train.sampler.cost, "Cost C >= 1")->capture_default_str();
  app.add_option("--slot", slot, "Reweighted slot")
      ->check(CLI::IsMember({"neg", "pos", "none"}))
      ->capture_default_str();
  app.add_option("--emphasized-group", config.train.sampler.emphasized_group,
                 "Group weighted by C (default: majority for neg, minority for pos)");
  app.add_option("--triplets-per-epoch", triplets, "Count or 'auto' (= train interactions)")
      ->capture_default_str();
  app.add_option("--user-draw", user_draw, "uniform or interactions")
      ->check(CLI::IsMember({"uniform", "interactions"}))
      ->capture_default_str();
  app.add_option("--k", config.ks, "Cutoffs")->delimiter(',')->capture_default_str();
  app.add_option("--seed", config.seed)->capture_default_str();
  app.add_option("--dataset", config.dataset, "Run label (default: interactions file stem)");
  app.add_option("--report-group", config.report_group, "Group shown in sweep tables");
  app.add_option("--out", config.out, "Output directory")->capture_default_str();
  app.add_option("--split-dir", config.split_dir, "Prepared split directory (default: --out)");
  app.add_option("--checkpoint", config.checkpoint, "Checkpoint path (default: <out>/model.ckpt)");

  auto* prepare = app.add_subcommand("prepare", "Filter, split and write dataset statistics");
  auto* train_cmd = app.add_subcommand("train", "Train BPR-MF on a prepared split");
  auto* evaluate = app.add_subcommand("evaluate", "NDCG and group exposure for a checkpoint");
  auto* audit = app.add_subcommand("audit", "Sample triplets and report their group mix");
  std::size_t n_samples = 100'000;
  fs::path dump;
  audit->add_option("--n-samples", n_samples)->capture_default_str();
  audit->add_option("--dump-triplets", dump, "Write sampled triplets to this file");
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over costs and slots");
  std::vector<double> costs = {1.0, 1.2, 2.0, 3.0};
  std::vector<std::string> slot_names = {"neg"};
  sweep->add_option("--costs", costs)->delimiter(',')->capture_default_str();
  sweep->add_option("--slots", slot_names)
      ->delimiter(',')
      ->check(CLI::IsMember({"neg", "pos"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    config.sep = parse_sep(sep);
    config.train.sampler.target_slot = parse_target_slot(slot);
    config.train.sampler.user_draw = parse_user_draw(user_draw);
    if (triplets != "auto") {
      std::size_t n = 0;
      const auto [ptr, ec] = std::from_chars(triplets.data(), triplets.data() + triplets.size(), n);
      if (ec != std::errc() || ptr != triplets.data() + triplets.size()) {
        throw ConfigError("--triplets-per-epoch must be a count or 'auto'");
      }
      config.train.sampler.triplets_per_epoch = n;
    }
    if (config.train.sampler.target_slot == TargetSlot::kNone && config.train.sampler.cost != 1.0) {
      throw ConfigError("--cost needs --slot neg or pos");
    }
    config.resolve();

    if (*prepare) {
      const auto prepared = cmd_prepare(config);
      std::cout << "train " << prepared.split.train.size() << ", validation "
                << prepared.split.validation.size() << ", test " << prepared.split.test.size()
                << " -> " << config.out.string() << '\n';
    } else if (*train_cmd) {
      const auto result = cmd_train(config);
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        std::cout << "epoch " << e + 1 << " loss " << result.epoch_loss[e] << '\n';
      }
      std::cout << to_json(result.audit).dump() << '\n';
    } else if (*evaluate) {
      std::cout << to_json(cmd_evaluate(config)).dump(2) << '\n';
    } else if (*audit) {
      std::cout << to_json(cmd_audit(config, n_samples, dump)).dump(2) << '\n';
    } else if (*sweep) {
      std::vector<TargetSlot> slots;
      for (const auto& s : slot_names) slots.push_back(parse_target_slot(s));
      const auto result = cmd_sweep(config, costs, slots);
      std::cout << sweep_csv(result, config.ks);
      if (!result.all_ok()) return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fairbpr::cli
