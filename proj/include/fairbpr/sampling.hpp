#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairbpr/dataset.hpp"
#include "fairbpr/rng.hpp"

namespace fairbpr {

// Training sample (u, i, j) as rows of a TrainIndex.
struct Triplet {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;

  bool operator==(const Triplet&) const = default;
};

// Which triplet slot the cost reweights.
enum class TargetSlot { kNone, kNegative, kPositive };

// How the user of a triplet is drawn.
enum class UserDraw { kUniform, kByInteractions };

std::string to_string(TargetSlot slot);
TargetSlot parse_target_slot(std::string_view text);
std::string to_string(UserDraw draw);
UserDraw parse_user_draw(std::string_view text);

inline constexpr std::size_t kMaxRejections = 10'000;

struct SamplerConfig {
  double cost = 1.0;
  TargetSlot target_slot = TargetSlot::kNone;
  std::string emphasized_group;
  std::uint64_t seed = 0;
  // Unset means one triplet per train interaction.
  std::optional<std::size_t> triplets_per_epoch;
  UserDraw user_draw = UserDraw::kUniform;

  void validate() const;
  std::size_t resolved_triplets(const TrainIndex& train) const {
    return triplets_per_epoch.value_or(train.num_interactions());
  }
};

nlohmann::json to_json(const SamplerConfig& config);

// Sampling weight per train item row. Items of the same group share a weight.
struct ItemWeights {
  std::vector<double> weights;
};

// (C*100/(C+1), 100/(C+1)): weight of the emphasized group and of the other.
std::pair<double, double> group_probability_vector(double cost);

// Two labeled groups (or fewer): emphasized items get the first component of
// group_probability_vector and all others the second. More than two labeled
// groups: emphasized items get C and all others 1. Unlabeled items are never
// emphasized.
ItemWeights build_item_weights(const TrainIndex& train, const Catalog& catalog,
                               const SamplerConfig& config);

// Draw tables derived from ItemWeights: an alias table over all train items
// for the negative slot and per-user cumulative weights for the positive slot.
class WeightedItemDraw {
 public:
  WeightedItemDraw(const TrainIndex& train, const ItemWeights& weights);

  std::uint32_t sample_item(Rng& rng) const {
    return static_cast<std::uint32_t>(items_.sample(rng));
  }
  std::uint32_t sample_user_item(const TrainIndex& train, std::uint32_t user, Rng& rng) const;

 private:
  AliasTable items_;
  std::vector<std::vector<double>> user_cumulative_;
};

// Users that can produce a triplet: at least one item, and not every item.
class UserPool {
 public:
  UserPool(const TrainIndex& train, UserDraw draw);
  std::uint32_t sample(Rng& rng) const;
  bool empty() const { return users_.empty(); }

 private:
  std::vector<std::uint32_t> users_;
  std::optional<AliasTable> by_interactions_;
};

// Baseline bootstrap sampler: u uniform over eligible users, i uniform over
// u's items, j uniform over train items resampled until j is not u's.
Triplet sample_triplet_uniform(const TrainIndex& train, const UserPool& users, Rng& rng);
Triplet sample_triplet_uniform(const TrainIndex& train, Rng& rng);

// Cost-sensitive sampler. kNegative draws j by weight (global weights,
// rejection until j is not u's); kPositive draws i by weight among u's items;
// kNone falls back to the baseline sampler.
Triplet sample_triplet_cost_sensitive(const TrainIndex& train, const UserPool& users,
                                      const WeightedItemDraw& draw, const SamplerConfig& config,
                                      Rng& rng);

// Stateful stream of triplets for one SamplerConfig; consecutive calls to
// next_epoch continue the same random stream.
class TripletSampler {
 public:
  TripletSampler(const TrainIndex& train, const Catalog& catalog, SamplerConfig config);

  Triplet sample();
  std::vector<Triplet> next_epoch(std::size_t n);
  const SamplerConfig& config() const { return config_; }

 private:
  const TrainIndex& train_;
  SamplerConfig config_;
  UserPool users_;
  std::optional<WeightedItemDraw> draw_;
  Rng rng_;
};

// Exactly N triplets (N from config), deterministic given config.seed.
std::vector<Triplet> generate_epoch_triplets(const TrainIndex& train, const Catalog& catalog,
                                             const SamplerConfig& config);

struct SlotShares {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

// Group composition of the positive and negative slots.
struct CompositionAudit {
  std::size_t triplets = 0;
  std::map<std::string, SlotShares> counts;  // per group, UNKNOWN included

  void add(const Triplet& t, const TrainIndex& train, const Catalog& catalog);
  void merge(const CompositionAudit& other);
  // 0 when there are no triplets.
  double positive_share(const std::string& group) const;
  double negative_share(const std::string& group) const;
};

CompositionAudit triplet_composition_audit(const std::vector<Triplet>& triplets,
                                           const TrainIndex& train, const Catalog& catalog);

nlohmann::json to_json(const CompositionAudit& audit);

// Rows `user<sep>pos_item<sep>neg_item`.
void dump_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets,
                   const TrainIndex& train, std::string_view sep = "\t");

}  // namespace fairbpr
