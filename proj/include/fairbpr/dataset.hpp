#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace fairbpr {

// Group label given to items that have no provider assignment.
inline constexpr std::string_view kUnknownGroup = "UNKNOWN";

struct Interaction {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

struct GroupAssignment {
  std::string item;
  std::string provider;
  std::string group;
};

// Item universe of the provider file and each item's group label.
struct Catalog {
  std::vector<std::string> items;  // sorted, unique
  std::unordered_map<std::string, std::string> groups;
  std::map<std::string, double> group_share;

  // Group of `item`, or kUnknownGroup when unlabeled.
  std::string_view group_of(std::string_view item) const;
  std::vector<std::string> labeled_groups() const;
  // Labeled group with the smallest catalog share (ties: first by name).
  std::string minority_group() const;
};

struct ProviderData {
  std::vector<GroupAssignment> assignments;  // deduplicated, file order
  Catalog catalog;
};

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
};

// Reads `user<sep>item<sep>rating<sep>timestamp` rows. Empty lines are
// skipped; anything else that does not parse raises ParseError.
std::vector<Interaction> load_interactions(const std::filesystem::path& path,
                                           std::string_view sep = "\t");

// Reads `item<sep>provider<sep>group` rows.
ProviderData load_provider_groups(const std::filesystem::path& path, std::string_view sep = "\t");

Catalog make_catalog(const std::vector<GroupAssignment>& assignments);

// Removes items with fewer than `min_item` interactions and users with fewer
// than `min_user`, repeated until both thresholds hold at once.
std::vector<Interaction> filter_min_interactions(const std::vector<Interaction>& data,
                                                 std::size_t min_item, std::size_t min_user);

// Global temporal split: sort by timestamp (stable), the last
// ceil(n * test_frac) rows go to test, the ceil(n * val_frac) before them to
// validation, the rest to train.
DatasetSplit temporal_split(const std::vector<Interaction>& data, double test_frac,
                            double val_frac);

void save_interactions(const std::filesystem::path& path, const std::vector<Interaction>& data,
                       std::string_view sep = "\t");

struct CatalogStats {
  std::size_t users = 0;            // distinct users over all parts
  std::size_t catalog_items = 0;    // items in the provider catalog
  std::size_t interacted_items = 0; // distinct items over all parts
  std::map<std::string, double> catalog_group_share;
  std::size_t interactions_total = 0;
  std::size_t interactions_train = 0;
  std::map<std::string, double> train_group_share;  // includes UNKNOWN when present
  std::size_t unknown_items = 0;    // interacted items missing from the catalog
};

CatalogStats catalog_stats(const DatasetSplit& split, const Catalog& catalog);

nlohmann::json to_json(const CatalogStats& stats);
// Header plus one row; group columns follow `groups` order.
std::string to_csv(const CatalogStats& stats, const std::vector<std::string>& groups);

// Dense view of the train split used by the samplers and the model. Users and
// items are the distinct identifiers of the train part, sorted ascending, so
// that row order equals identifier order.
class TrainIndex {
 public:
  explicit TrainIndex(const std::vector<Interaction>& train);

  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }
  std::size_t num_interactions() const { return num_interactions_; }

  const std::vector<std::string>& users() const { return users_; }
  const std::vector<std::string>& items() const { return items_; }
  const std::string& user_id(std::uint32_t row) const { return users_[row]; }
  const std::string& item_id(std::uint32_t row) const { return items_[row]; }

  // Sorted distinct item rows of a user.
  const std::vector<std::uint32_t>& user_items(std::uint32_t user) const {
    return user_items_[user];
  }
  bool has_item(std::uint32_t user, std::uint32_t item) const;
  // Interactions (with repeats) the user has in train.
  std::size_t user_interactions(std::uint32_t user) const { return user_counts_[user]; }

  std::optional<std::uint32_t> find_user(std::string_view id) const;
  std::optional<std::uint32_t> find_item(std::string_view id) const;

 private:
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::uint32_t> user_rows_;
  std::unordered_map<std::string, std::uint32_t> item_rows_;
  std::vector<std::vector<std::uint32_t>> user_items_;
  std::vector<std::size_t> user_counts_;
  std::size_t num_interactions_ = 0;
};

}  // namespace fairbpr
