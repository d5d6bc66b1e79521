#include "fairbpr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fairbpr/errors.hpp"

namespace fairbpr {
namespace {

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

template <typename Weight>
GroupShares group_shares(std::span<const RankedList> lists, const Catalog& catalog,
                         std::size_t k, Weight weight) {
  std::map<std::string, double> mass;
  double total = 0.0;
  for (const auto& list : lists) {
    const auto depth = std::min(k, list.items.size());
    for (std::size_t r = 0; r < depth; ++r) {
      const double w = weight(r + 1);
      mass[std::string(catalog.group_of(list.items[r]))] += w;
      total += w;
    }
  }
  GroupShares out;
  if (total == 0.0) return out;
  for (const auto& [group, m] : mass) out[group] = m / total;
  return out;
}

}  // namespace

std::optional<double> ndcg_at_k(const RankedList& ranked,
                                const std::unordered_set<std::string>& relevant, std::size_t k) {
  if (k == 0) throw DomainError("k must be >= 1");
  if (relevant.empty()) return std::nullopt;
  double dcg = 0.0;
  const auto depth = std::min(k, ranked.items.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (relevant.count(ranked.items[r])) dcg += discount(r + 1);
  }
  double idcg = 0.0;
  const auto ideal = std::min(k, relevant.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += discount(r + 1);
  return dcg / idcg;
}

GroupShares group_slot_share(std::span<const RankedList> lists, const Catalog& catalog,
                             std::size_t k) {
  return group_shares(lists, catalog, k, [](std::size_t) { return 1.0; });
}

GroupShares group_weighted_exposure(std::span<const RankedList> lists, const Catalog& catalog,
                                    std::size_t k) {
  return group_shares(lists, catalog, k, discount);
}

MetricsReport fairness_report(const FactorModel& model, const DatasetSplit& split,
                              const Catalog& catalog, const std::vector<std::size_t>& ks,
                              const CompositionAudit& audit, const nlohmann::json& config) {
  if (ks.empty()) throw DomainError("no cutoffs requested");
  const auto max_k = *std::max_element(ks.begin(), ks.end());
  if (*std::min_element(ks.begin(), ks.end()) == 0) throw DomainError("k must be >= 1");

  // Exclusion sets in model rows.
  std::vector<std::vector<std::uint32_t>> owned(model.num_users());
  std::unordered_map<std::string, std::uint32_t> item_rows;
  for (std::uint32_t r = 0; r < model.num_items(); ++r) item_rows.emplace(model.items()[r], r);
  for (const auto& row : split.train) {
    const auto u = model.find_user(row.user);
    const auto it = item_rows.find(row.item);
    if (u && it != item_rows.end()) owned[*u].push_back(it->second);
  }
  for (auto& list : owned) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  std::vector<std::unordered_set<std::string>> relevant(model.num_users());
  for (const auto& row : split.test) {
    const auto u = model.find_user(row.user);
    const auto it = item_rows.find(row.item);
    if (!u || it == item_rows.end()) continue;
    if (std::binary_search(owned[*u].begin(), owned[*u].end(), it->second)) continue;
    relevant[*u].insert(row.item);
  }

  std::vector<RankedList> lists;
  lists.reserve(model.num_users());
  for (std::uint32_t u = 0; u < model.num_users(); ++u) {
    const auto top = recommend_top_k(model, u, max_k, owned[u]);
    RankedList list{model.users()[u], {}, max_k};
    list.items.reserve(top.items.size());
    for (const auto item : top.items) list.items.push_back(model.items()[item]);
    lists.push_back(std::move(list));
  }

  MetricsReport report;
  report.list_users = lists.size();
  report.triplet_audit = audit;
  report.config = config;
  for (const auto k : ks) {
    double sum = 0.0;
    std::size_t users = 0;
    for (std::uint32_t u = 0; u < lists.size(); ++u) {
      const auto value = ndcg_at_k(lists[u], relevant[u], k);
      if (!value) continue;
      sum += *value;
      ++users;
    }
    if (users == 0) throw Error("no user has a relevant test item; NDCG is undefined");
    report.ndcg[k] = sum / static_cast<double>(users);
    report.ndcg_users = users;
    report.slot_share[k] = group_slot_share(lists, catalog, k);
    report.weighted_exposure[k] = group_weighted_exposure(lists, catalog, k);
  }
  return report;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json ndcg = nlohmann::json::object();
  nlohmann::json slot = nlohmann::json::object();
  nlohmann::json weighted = nlohmann::json::object();
  for (const auto& [k, value] : report.ndcg) ndcg[std::to_string(k)] = value;
  for (const auto& [k, shares] : report.slot_share) slot[std::to_string(k)] = shares;
  for (const auto& [k, shares] : report.weighted_exposure) weighted[std::to_string(k)] = shares;
  return {
      {"ndcg", ndcg},
      {"ndcg_users", report.ndcg_users},
      {"list_users", report.list_users},
      {"slot_share", slot},
      {"weighted_exposure", weighted},
      {"triplet_audit", to_json(report.triplet_audit)},
      {"config", report.config},
  };
}

std::string to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "k,ndcg,group,slot_share,weighted_exposure\n";
  for (const auto& [k, ndcg] : report.ndcg) {
    const auto& slot = report.slot_share.at(k);
    const auto& weighted = report.weighted_exposure.at(k);
    for (const auto& [group, share] : slot) {
      const auto it = weighted.find(group);
      out << k << ',' << ndcg << ',' << group << ',' << share << ','
          << (it == weighted.end() ? 0.0 : it->second) << '\n';
    }
  }
  return out.str();
}

}  // namespace fairbpr
