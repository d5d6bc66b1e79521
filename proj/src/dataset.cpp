#include "fairbpr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "fairbpr/errors.hpp"

namespace fairbpr {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

// Calls fn(fields, line_number) for every non-empty line.
template <typename Fn>
void for_each_row(const std::filesystem::path& path, std::string_view sep, Fn fn) {
  if (sep.empty()) throw ConfigError("empty field separator");
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(split_fields(line, sep), line_no);
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
}

std::size_t fraction_count(std::size_t n, double frac) {
  // Guard against 10 * 0.2 landing a hair above 2.
  const double exact = static_cast<double>(n) * frac;
  return std::min(n, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
}

std::map<std::string, double> normalize(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  std::map<std::string, double> out;
  if (total == 0) return out;
  for (const auto& [group, c] : counts) {
    out[group] = static_cast<double>(c) / static_cast<double>(total);
  }
  return out;
}

}  // namespace

std::string_view Catalog::group_of(std::string_view item) const {
  const auto it = groups.find(std::string(item));
  return it == groups.end() ? kUnknownGroup : std::string_view(it->second);
}

std::vector<std::string> Catalog::labeled_groups() const {
  std::vector<std::string> out;
  out.reserve(group_share.size());
  for (const auto& [group, _] : group_share) out.push_back(group);
  return out;
}

std::string Catalog::minority_group() const {
  std::string best;
  double best_share = 2.0;
  for (const auto& [group, share] : group_share) {
    if (share < best_share) {
      best = group;
      best_share = share;
    }
  }
  return best;
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path,
                                           std::string_view sep) {
  std::vector<Interaction> out;
  const auto file = path.string();
  for_each_row(path, sep, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 4) {
      throw ParseError(file, line, "expected 4 fields, got " + std::to_string(f.size()));
    }
    Interaction row;
    row.user = std::string(f[0]);
    row.item = std::string(f[1]);
    if (row.user.empty() || row.item.empty()) throw ParseError(file, line, "empty identifier");
    if (!parse_number(f[2], row.rating) || !std::isfinite(row.rating)) {
      throw ParseError(file, line, "non-numeric rating '" + std::string(f[2]) + "'");
    }
    if (!parse_number(f[3], row.timestamp)) {
      throw ParseError(file, line, "non-numeric timestamp '" + std::string(f[3]) + "'");
    }
    if (row.timestamp < 0) throw ParseError(file, line, "negative timestamp");
    out.push_back(std::move(row));
  });
  return out;
}

Catalog make_catalog(const std::vector<GroupAssignment>& assignments) {
  Catalog catalog;
  std::map<std::string, std::size_t> counts;
  for (const auto& a : assignments) {
    const auto [it, inserted] = catalog.groups.emplace(a.item, a.group);
    if (!inserted) {
      if (it->second != a.group) {
        throw ConflictError("item '" + a.item + "' labeled both '" + it->second + "' and '" +
                            a.group + "'");
      }
      continue;
    }
    catalog.items.push_back(a.item);
    ++counts[a.group];
  }
  std::sort(catalog.items.begin(), catalog.items.end());
  catalog.group_share = normalize(counts);
  return catalog;
}

ProviderData load_provider_groups(const std::filesystem::path& path, std::string_view sep) {
  ProviderData data;
  const auto file = path.string();
  std::unordered_map<std::string, std::string> seen;
  for_each_row(path, sep, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 3) {
      throw ParseError(file, line, "expected 3 fields, got " + std::to_string(f.size()));
    }
    GroupAssignment a{std::string(f[0]), std::string(f[1]), std::string(f[2])};
    if (a.item.empty() || a.group.empty()) throw ParseError(file, line, "empty identifier");
    if (a.group == kUnknownGroup) {
      throw ParseError(file, line, "group label '" + a.group + "' is reserved");
    }
    const auto it = seen.find(a.item);
    if (it != seen.end()) {
      if (it->second != a.group) {
        throw ConflictError(file + ":" + std::to_string(line) + ": item '" + a.item +
                            "' labeled both '" + it->second + "' and '" + a.group + "'");
      }
      return;
    }
    seen.emplace(a.item, a.group);
    data.assignments.push_back(std::move(a));
  });
  data.catalog = make_catalog(data.assignments);
  return data;
}

std::vector<Interaction> filter_min_interactions(const std::vector<Interaction>& data,
                                                 std::size_t min_item, std::size_t min_user) {
  std::vector<Interaction> current = data;
  while (true) {
    std::unordered_map<std::string, std::size_t> item_counts, user_counts;
    for (const auto& row : current) {
      ++item_counts[row.item];
      ++user_counts[row.user];
    }
    std::vector<Interaction> next;
    next.reserve(current.size());
    for (const auto& row : current) {
      if (item_counts[row.item] >= min_item && user_counts[row.user] >= min_user) {
        next.push_back(row);
      }
    }
    if (next.size() == current.size()) return current;
    current = std::move(next);
  }
}

DatasetSplit temporal_split(const std::vector<Interaction>& data, double test_frac,
                            double val_frac) {
  if (!(test_frac >= 0.0) || !(val_frac >= 0.0) || !(test_frac + val_frac < 1.0)) {
    throw DomainError("temporal_split: need 0 <= test_frac + val_frac < 1");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data[a].timestamp < data[b].timestamp;
  });

  const std::size_t n = data.size();
  const std::size_t n_test = fraction_count(n, test_frac);
  const std::size_t n_val = std::min(n - n_test, fraction_count(n, val_frac));
  const std::size_t n_train = n - n_test - n_val;

  DatasetSplit split;
  split.train.reserve(n_train);
  split.validation.reserve(n_val);
  split.test.reserve(n_test);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = data[order[r]];
    if (r < n_train) {
      split.train.push_back(row);
    } else if (r < n_train + n_val) {
      split.validation.push_back(row);
    } else {
      split.test.push_back(row);
    }
  }
  return split;
}

void save_interactions(const std::filesystem::path& path, const std::vector<Interaction>& data,
                       std::string_view sep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  for (const auto& row : data) {
    // Shortest round-trip representation.
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), row.rating);
    out << row.user << sep << row.item << sep << std::string_view(buf, end - buf) << sep
        << row.timestamp << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

CatalogStats catalog_stats(const DatasetSplit& split, const Catalog& catalog) {
  CatalogStats stats;
  std::unordered_set<std::string> users, items;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& row : *part) {
      users.insert(row.user);
      items.insert(row.item);
    }
  }
  stats.users = users.size();
  stats.catalog_items = catalog.items.size();
  stats.interacted_items = items.size();
  stats.catalog_group_share = catalog.group_share;
  stats.interactions_total = split.train.size() + split.validation.size() + split.test.size();
  stats.interactions_train = split.train.size();

  std::map<std::string, std::size_t> train_counts;
  for (const auto& row : split.train) ++train_counts[std::string(catalog.group_of(row.item))];
  stats.train_group_share = normalize(train_counts);
  for (const auto& item : items) {
    if (catalog.group_of(item) == kUnknownGroup) ++stats.unknown_items;
  }
  return stats;
}

nlohmann::json to_json(const CatalogStats& stats) {
  return {
      {"users", stats.users},
      {"catalog_items", stats.catalog_items},
      {"interacted_items", stats.interacted_items},
      {"catalog_group_share", stats.catalog_group_share},
      {"interactions_total", stats.interactions_total},
      {"interactions_train", stats.interactions_train},
      {"train_group_share", stats.train_group_share},
      {"unknown_items", stats.unknown_items},
  };
}

std::string to_csv(const CatalogStats& stats, const std::vector<std::string>& groups) {
  std::ostringstream out;
  out << "users,catalog_items";
  for (const auto& g : groups) out << ",catalog_share_" << g;
  out << ",interactions_total,interactions_train";
  for (const auto& g : groups) out << ",train_share_" << g;
  out << ",unknown_items\n";

  auto share = [](const std::map<std::string, double>& m, const std::string& g) {
    const auto it = m.find(g);
    return it == m.end() ? 0.0 : it->second;
  };
  out.precision(17);
  out << stats.users << ',' << stats.catalog_items;
  for (const auto& g : groups) out << ',' << share(stats.catalog_group_share, g);
  out << ',' << stats.interactions_total << ',' << stats.interactions_train;
  for (const auto& g : groups) out << ',' << share(stats.train_group_share, g);
  out << ',' << stats.unknown_items << '\n';
  return out.str();
}

TrainIndex::TrainIndex(const std::vector<Interaction>& train) {
  std::set<std::string> users, items;
  for (const auto& row : train) {
    users.insert(row.user);
    items.insert(row.item);
  }
  users_.assign(users.begin(), users.end());
  items_.assign(items.begin(), items.end());
  for (std::uint32_t r = 0; r < users_.size(); ++r) user_rows_.emplace(users_[r], r);
  for (std::uint32_t r = 0; r < items_.size(); ++r) item_rows_.emplace(items_[r], r);

  user_items_.resize(users_.size());
  user_counts_.assign(users_.size(), 0);
  for (const auto& row : train) {
    const auto u = user_rows_.at(row.user);
    user_items_[u].push_back(item_rows_.at(row.item));
    ++user_counts_[u];
  }
  for (auto& list : user_items_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  num_interactions_ = train.size();
}

bool TrainIndex::has_item(std::uint32_t user, std::uint32_t item) const {
  const auto& list = user_items_[user];
  return std::binary_search(list.begin(), list.end(), item);
}

std::optional<std::uint32_t> TrainIndex::find_user(std::string_view id) const {
  const auto it = user_rows_.find(std::string(id));
  if (it == user_rows_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> TrainIndex::find_item(std::string_view id) const {
  const auto it = item_rows_.find(std::string(id));
  if (it == item_rows_.end()) return std::nullopt;
  return it->second;
}

}  // namespace fairbpr
