#include "fairbpr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fairbpr/errors.hpp"

namespace fairbpr {
namespace {

std::uint32_t sample_negative_uniform(const TrainIndex& train, std::uint32_t user, Rng& rng) {
  for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
    const auto j = static_cast<std::uint32_t>(rng.uniform_index(train.num_items()));
    if (!train.has_item(user, j)) return j;
  }
  throw SamplingError("no negative item found for user '" + train.user_id(user) + "' after " +
                      std::to_string(kMaxRejections) + " draws");
}

std::uint32_t sample_negative_weighted(const TrainIndex& train, const WeightedItemDraw& draw,
                                       std::uint32_t user, Rng& rng) {
  for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
    const auto j = draw.sample_item(rng);
    if (!train.has_item(user, j)) return j;
  }
  throw SamplingError("no weighted negative item found for user '" + train.user_id(user) +
                      "' after " + std::to_string(kMaxRejections) + " draws");
}

std::uint32_t sample_positive_uniform(const TrainIndex& train, std::uint32_t user, Rng& rng) {
  const auto& items = train.user_items(user);
  return items[rng.uniform_index(items.size())];
}

}  // namespace

std::string to_string(TargetSlot slot) {
  switch (slot) {
    case TargetSlot::kNone: return "none";
    case TargetSlot::kNegative: return "neg";
    case TargetSlot::kPositive: return "pos";
  }
  return "none";
}

TargetSlot parse_target_slot(std::string_view text) {
  if (text == "none") return TargetSlot::kNone;
  if (text == "neg") return TargetSlot::kNegative;
  if (text == "pos") return TargetSlot::kPositive;
  throw ConfigError("unknown slot '" + std::string(text) + "' (expected neg, pos or none)");
}

std::string to_string(UserDraw draw) {
  return draw == UserDraw::kUniform ? "uniform" : "interactions";
}

UserDraw parse_user_draw(std::string_view text) {
  if (text == "uniform") return UserDraw::kUniform;
  if (text == "interactions") return UserDraw::kByInteractions;
  throw ConfigError("unknown user draw '" + std::string(text) +
                    "' (expected uniform or interactions)");
}

void SamplerConfig::validate() const {
  if (!(cost >= 1.0) || !std::isfinite(cost)) {
    throw ConfigError("cost must be a finite value >= 1, got " + std::to_string(cost));
  }
  if (target_slot != TargetSlot::kNone && emphasized_group.empty()) {
    throw ConfigError("a target slot needs an emphasized group");
  }
}

nlohmann::json to_json(const SamplerConfig& config) {
  nlohmann::json j = {
      {"cost", config.cost},
      {"slot", to_string(config.target_slot)},
      {"emphasized_group", config.emphasized_group},
      {"seed", config.seed},
      {"user_draw", to_string(config.user_draw)},
  };
  if (config.triplets_per_epoch) {
    j["triplets_per_epoch"] = *config.triplets_per_epoch;
  } else {
    j["triplets_per_epoch"] = "auto";
  }
  return j;
}

std::pair<double, double> group_probability_vector(double cost) {
  if (!(cost >= 1.0) || !std::isfinite(cost)) {
    throw DomainError("cost must be >= 1, got " + std::to_string(cost));
  }
  return {(cost * 100.0) / (cost + 1.0), 100.0 / (cost + 1.0)};
}

ItemWeights build_item_weights(const TrainIndex& train, const Catalog& catalog,
                               const SamplerConfig& config) {
  if (train.num_items() == 0) throw DomainError("build_item_weights: empty item set");
  double emphasized = 0.0;
  double other = 0.0;
  if (catalog.group_share.size() <= 2) {
    std::tie(emphasized, other) = group_probability_vector(config.cost);
  } else {
    group_probability_vector(config.cost);  // validates C
    emphasized = config.cost;
    other = 1.0;
  }
  ItemWeights out;
  out.weights.reserve(train.num_items());
  for (const auto& item : train.items()) {
    const auto group = catalog.group_of(item);
    const bool is_emphasized = group != kUnknownGroup && group == config.emphasized_group;
    out.weights.push_back(is_emphasized ? emphasized : other);
  }
  return out;
}

WeightedItemDraw::WeightedItemDraw(const TrainIndex& train, const ItemWeights& weights)
    : items_(weights.weights) {
  if (weights.weights.size() != train.num_items()) {
    throw DomainError("item weights do not cover the train items");
  }
  user_cumulative_.resize(train.num_users());
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    auto& cumulative = user_cumulative_[u];
    double total = 0.0;
    for (const auto item : train.user_items(u)) {
      total += weights.weights[item];
      cumulative.push_back(total);
    }
  }
}

std::uint32_t WeightedItemDraw::sample_user_item(const TrainIndex& train, std::uint32_t user,
                                                 Rng& rng) const {
  const auto& cumulative = user_cumulative_[user];
  const double target = rng.uniform01() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  return train.user_items(user)[static_cast<std::size_t>(it - cumulative.begin())];
}

UserPool::UserPool(const TrainIndex& train, UserDraw draw) {
  std::vector<double> counts;
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    const auto owned = train.user_items(u).size();
    if (owned == 0 || owned >= train.num_items()) continue;
    users_.push_back(u);
    counts.push_back(static_cast<double>(train.user_interactions(u)));
  }
  if (draw == UserDraw::kByInteractions && !users_.empty()) by_interactions_.emplace(counts);
}

std::uint32_t UserPool::sample(Rng& rng) const {
  if (users_.empty()) {
    throw SamplingError("no user has both a positive and a possible negative item");
  }
  const auto pick = by_interactions_ ? by_interactions_->sample(rng)
                                     : rng.uniform_index(users_.size());
  return users_[pick];
}

Triplet sample_triplet_uniform(const TrainIndex& train, const UserPool& users, Rng& rng) {
  Triplet t;
  t.user = users.sample(rng);
  t.positive = sample_positive_uniform(train, t.user, rng);
  t.negative = sample_negative_uniform(train, t.user, rng);
  return t;
}

Triplet sample_triplet_uniform(const TrainIndex& train, Rng& rng) {
  return sample_triplet_uniform(train, UserPool(train, UserDraw::kUniform), rng);
}

Triplet sample_triplet_cost_sensitive(const TrainIndex& train, const UserPool& users,
                                      const WeightedItemDraw& draw, const SamplerConfig& config,
                                      Rng& rng) {
  Triplet t;
  switch (config.target_slot) {
    case TargetSlot::kNone:
      return sample_triplet_uniform(train, users, rng);
    case TargetSlot::kNegative:
      t.user = users.sample(rng);
      t.positive = sample_positive_uniform(train, t.user, rng);
      t.negative = sample_negative_weighted(train, draw, t.user, rng);
      return t;
    case TargetSlot::kPositive:
      t.user = users.sample(rng);
      t.positive = draw.sample_user_item(train, t.user, rng);
      t.negative = sample_negative_uniform(train, t.user, rng);
      return t;
  }
  return t;
}

TripletSampler::TripletSampler(const TrainIndex& train, const Catalog& catalog,
                               SamplerConfig config)
    : train_(train),
      config_(std::move(config)),
      users_(train, config_.user_draw),
      rng_(config_.seed) {
  config_.validate();
  if (config_.target_slot != TargetSlot::kNone) {
    draw_.emplace(train, build_item_weights(train, catalog, config_));
  }
}

Triplet TripletSampler::sample() {
  if (!draw_) return sample_triplet_uniform(train_, users_, rng_);
  return sample_triplet_cost_sensitive(train_, users_, *draw_, config_, rng_);
}

std::vector<Triplet> TripletSampler::next_epoch(std::size_t n) {
  std::vector<Triplet> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(sample());
  return out;
}

std::vector<Triplet> generate_epoch_triplets(const TrainIndex& train, const Catalog& catalog,
                                             const SamplerConfig& config) {
  TripletSampler sampler(train, catalog, config);
  return sampler.next_epoch(config.resolved_triplets(train));
}

void CompositionAudit::add(const Triplet& t, const TrainIndex& train, const Catalog& catalog) {
  ++triplets;
  ++counts[std::string(catalog.group_of(train.item_id(t.positive)))].positive;
  ++counts[std::string(catalog.group_of(train.item_id(t.negative)))].negative;
}

void CompositionAudit::merge(const CompositionAudit& other) {
  triplets += other.triplets;
  for (const auto& [group, c] : other.counts) {
    counts[group].positive += c.positive;
    counts[group].negative += c.negative;
  }
}

double CompositionAudit::positive_share(const std::string& group) const {
  const auto it = counts.find(group);
  if (triplets == 0 || it == counts.end()) return 0.0;
  return static_cast<double>(it->second.positive) / static_cast<double>(triplets);
}

double CompositionAudit::negative_share(const std::string& group) const {
  const auto it = counts.find(group);
  if (triplets == 0 || it == counts.end()) return 0.0;
  return static_cast<double>(it->second.negative) / static_cast<double>(triplets);
}

CompositionAudit triplet_composition_audit(const std::vector<Triplet>& triplets,
                                           const TrainIndex& train, const Catalog& catalog) {
  CompositionAudit audit;
  for (const auto& t : triplets) audit.add(t, train, catalog);
  return audit;
}

nlohmann::json to_json(const CompositionAudit& audit) {
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [group, c] : audit.counts) {
    groups[group] = {
        {"positive_count", c.positive},
        {"negative_count", c.negative},
        {"positive_share", audit.positive_share(group)},
        {"negative_share", audit.negative_share(group)},
    };
  }
  return {{"triplets", audit.triplets}, {"groups", groups}};
}

void dump_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets,
                   const TrainIndex& train, std::string_view sep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : triplets) {
    out << train.user_id(t.user) << sep << train.item_id(t.positive) << sep
        << train.item_id(t.negative) << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace fairbpr
