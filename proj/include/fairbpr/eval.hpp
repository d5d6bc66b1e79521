#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fairbpr/dataset.hpp"
#include "fairbpr/model.hpp"
#include "fairbpr/sampling.hpp"

namespace fairbpr {

struct RankedList {
  std::string user;
  std::vector<std::string> items;  // rank 1 first
  std::size_t k = 0;
};

// Group label -> fraction.
using GroupShares = std::map<std::string, double>;

// Binary-relevance NDCG@k with 1/log2(rank+1) discount and an ideal DCG over
// min(k, |relevant|) positions. nullopt when `relevant` is empty.
std::optional<double> ndcg_at_k(const RankedList& ranked,
                                const std::unordered_set<std::string>& relevant, std::size_t k);

// Fraction of the occupied top-k slots held by each group.
GroupShares group_slot_share(std::span<const RankedList> lists, const Catalog& catalog,
                             std::size_t k);

// Like group_slot_share, but the slot at rank r carries weight 1/log2(r+1).
GroupShares group_weighted_exposure(std::span<const RankedList> lists, const Catalog& catalog,
                                    std::size_t k);

struct MetricsReport {
  std::map<std::size_t, double> ndcg;
  std::size_t ndcg_users = 0;  // users with at least one relevant test item
  std::size_t list_users = 0;  // users that received a list
  std::map<std::size_t, GroupShares> slot_share;
  std::map<std::size_t, GroupShares> weighted_exposure;
  CompositionAudit triplet_audit;
  nlohmann::json config = nlohmann::json::object();
};

// Top-max(ks) lists for every model user (candidates: train items minus the
// user's train items). NDCG is averaged over users whose test items, restricted
// to candidates, are non-empty; exposure covers every list.
MetricsReport fairness_report(const FactorModel& model, const DatasetSplit& split,
                              const Catalog& catalog, const std::vector<std::size_t>& ks,
                              const CompositionAudit& audit,
                              const nlohmann::json& config = nlohmann::json::object());

nlohmann::json to_json(const MetricsReport& report);

// One row per (k, group): k,ndcg,group,slot_share,weighted_exposure.
std::string to_csv(const MetricsReport& report);

}  // namespace fairbpr
