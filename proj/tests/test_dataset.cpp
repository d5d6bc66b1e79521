#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "fairbpr/dataset.hpp"
#include "fairbpr/errors.hpp"
#include "test_util.hpp"

using namespace fairbpr;
using fairbpr::testing::TempDir;
using fairbpr::testing::write_file;

namespace {

std::vector<Interaction> rows(std::initializer_list<std::pair<const char*, const char*>> pairs) {
  std::vector<Interaction> out;
  std::int64_t t = 0;
  for (const auto& [u, i] : pairs) out.push_back({u, i, 1.0, t++});
  return out;
}

// Largest subset meeting both thresholds, by enumerating every subset. Valid
// subsets are closed under union, so the union of all of them is the answer.
std::vector<Interaction> brute_force_core(const std::vector<Interaction>& data,
                                          std::size_t min_item, std::size_t min_user) {
  const std::size_t n = data.size();
  std::uint32_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::map<std::string, std::size_t> items, users;
    for (std::size_t k = 0; k < n; ++k) {
      if (mask >> k & 1u) {
        ++items[data[k].item];
        ++users[data[k].user];
      }
    }
    bool valid = true;
    for (const auto& [_, c] : items) valid &= c >= min_item;
    for (const auto& [_, c] : users) valid &= c >= min_user;
    if (valid) best |= mask;
  }
  std::vector<Interaction> out;
  for (std::size_t k = 0; k < n; ++k) {
    if (best >> k & 1u) out.push_back(data[k]);
  }
  return out;
}

}  // namespace

TEST_CASE("load_interactions parses rows in file order") {
  TempDir dir("ds");
  write_file(dir / "a.tsv", "u1\ti1\t5\t100\nu2\ti2\t3.5\t50\nu1\ti3\t1\t0\n");
  const auto data = load_interactions(dir / "a.tsv");
  REQUIRE(data.size() == 3);
  CHECK(data[0] == Interaction{"u1", "i1", 5.0, 100});
  CHECK(data[1] == Interaction{"u2", "i2", 3.5, 50});
  CHECK(data[2].timestamp == 0);
}

TEST_CASE("load_interactions supports :: separators and CRLF") {
  TempDir dir("ds");
  write_file(dir / "r.dat", "1::1193::5::978300760\r\n2::661::3::978302109\r\n");
  const auto data = load_interactions(dir / "r.dat", "::");
  REQUIRE(data.size() == 2);
  CHECK(data[1] == Interaction{"2", "661", 3.0, 978302109});
}

TEST_CASE("load_interactions edge cases") {
  TempDir dir("ds");
  SUBCASE("empty file") {
    write_file(dir / "e.tsv", "");
    CHECK(load_interactions(dir / "e.tsv").empty());
  }
  SUBCASE("non-numeric timestamp names the line") {
    write_file(dir / "b.tsv", "u\ti\t1\t5\nu\tj\t1\tyesterday\n");
    try {
      load_interactions(dir / "b.tsv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("wrong field count") {
    write_file(dir / "c.tsv", "u\ti\t1\n");
    CHECK_THROWS_AS(load_interactions(dir / "c.tsv"), ParseError);
  }
  SUBCASE("negative timestamp") {
    write_file(dir / "d.tsv", "u\ti\t1\t-4\n");
    CHECK_THROWS_AS(load_interactions(dir / "d.tsv"), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_interactions(dir / "nope.tsv"), IoError);
  }
}

TEST_CASE("load_provider_groups computes catalog shares") {
  TempDir dir("ds");
  std::string text;
  for (int i = 0; i < 9; ++i) text += "m" + std::to_string(i) + "\tdir" + std::to_string(i) + "\tM\n";
  text += "f0\tdirF\tF\n";
  text += "m3\tdir3\tM\n";  // identical repeat
  write_file(dir / "p.tsv", text);
  const auto data = load_provider_groups(dir / "p.tsv");
  CHECK(data.assignments.size() == 10);
  CHECK(data.catalog.items.size() == 10);
  CHECK(data.catalog.group_share.at("M") == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(data.catalog.group_share.at("F") == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(data.catalog.group_of("f0") == "F");
  CHECK(data.catalog.group_of("zzz") == kUnknownGroup);
  CHECK(data.catalog.minority_group() == "F");
}

TEST_CASE("load_provider_groups rejects conflicting labels") {
  TempDir dir("ds");
  write_file(dir / "p.tsv", "x\tp1\tF\nx\tp1\tM\n");
  CHECK_THROWS_AS(load_provider_groups(dir / "p.tsv"), ConflictError);
}

TEST_CASE("catalog group shares sum to one") {
  fairbpr::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GroupAssignment> a;
    const auto n = 1 + rng.uniform_index(40);
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back({"i" + std::to_string(i), "p", "g" + std::to_string(rng.uniform_index(4))});
    }
    const auto catalog = make_catalog(a);
    double sum = 0.0;
    for (const auto& [_, s] : catalog.group_share) sum += s;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("filter_min_interactions") {
  SUBCASE("item below threshold is removed") {
    std::vector<Interaction> data;
    for (int u = 0; u < 9; ++u) data.push_back({"u" + std::to_string(u), "thin", 1, u});
    for (int u = 0; u < 10; ++u) data.push_back({"u" + std::to_string(u), "thick", 1, u});
    const auto out = filter_min_interactions(data, 10, 0);
    CHECK(out.size() == 10);
    CHECK(std::all_of(out.begin(), out.end(), [](const auto& r) { return r.item == "thick"; }));
  }
  SUBCASE("zero thresholds are the identity") {
    const auto data = rows({{"a", "x"}, {"b", "y"}, {"a", "y"}});
    CHECK(filter_min_interactions(data, 0, 0) == data);
  }
  SUBCASE("chain removal matches brute-force fixed point") {
    // d is thin -> u4 drops -> ... -> u3 and u5 cascade out.
    const auto data = rows({{"u1", "a"}, {"u1", "b"}, {"u2", "a"}, {"u2", "b"}, {"u3", "a"},
                            {"u3", "c"}, {"u4", "b"}, {"u4", "d"}, {"u5", "c"}});
    const auto out = filter_min_interactions(data, 2, 2);
    CHECK(out == brute_force_core(data, 2, 2));
    CHECK(out == rows({{"u1", "a"}, {"u1", "b"}, {"u2", "a"}, {"u2", "b"}}));
  }
}

TEST_CASE("filter_min_interactions is a fixed point and matches brute force") {
  fairbpr::Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Interaction> data;
    const auto n = 4 + rng.uniform_index(10);
    for (std::size_t k = 0; k < n; ++k) {
      data.push_back({"u" + std::to_string(rng.uniform_index(5)),
                      "i" + std::to_string(rng.uniform_index(5)), 1.0,
                      static_cast<std::int64_t>(k)});
    }
    const auto min_item = rng.uniform_index(4);
    const auto min_user = rng.uniform_index(4);
    const auto once = filter_min_interactions(data, min_item, min_user);
    CHECK(filter_min_interactions(once, min_item, min_user) == once);
    CHECK(once == brute_force_core(data, min_item, min_user));
  }
}

TEST_CASE("temporal_split") {
  SUBCASE("10 rows at 0.2/0.2 -> 6/2/2, newest last") {
    std::vector<Interaction> data;
    for (int k = 0; k < 10; ++k) data.push_back({"u", "i" + std::to_string(k), 1, 100 - k});
    const auto split = temporal_split(data, 0.2, 0.2);
    CHECK(split.train.size() == 6);
    CHECK(split.validation.size() == 2);
    CHECK(split.test.size() == 2);
    CHECK(split.test.back().timestamp == 100);
    CHECK(split.train.front().timestamp == 91);
  }
  SUBCASE("equal timestamps keep input order") {
    std::vector<Interaction> data;
    for (int k = 0; k < 5; ++k) data.push_back({"u", "i" + std::to_string(k), 1, 7});
    const auto split = temporal_split(data, 0.2, 0.2);
    CHECK(split.train.size() == 3);
    CHECK(split.train[0].item == "i0");
    CHECK(split.validation[0].item == "i3");
    CHECK(split.test[0].item == "i4");
  }
  SUBCASE("ceil rounding") {
    std::vector<Interaction> data;
    for (int k = 0; k < 7; ++k) data.push_back({"u", "i", 1, k});
    const auto split = temporal_split(data, 0.2, 0.2);  // ceil(1.4) = 2 each
    CHECK(split.test.size() == 2);
    CHECK(split.validation.size() == 2);
    CHECK(split.train.size() == 3);
  }
  SUBCASE("invalid fractions") {
    CHECK_THROWS_AS(temporal_split({}, 0.5, 0.5), DomainError);
    CHECK_THROWS_AS(temporal_split({}, -0.1, 0.2), DomainError);
  }
}

TEST_CASE("temporal_split partitions and orders any permutation") {
  fairbpr::Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Interaction> data;
    const auto n = rng.uniform_index(60);
    for (std::size_t k = 0; k < n; ++k) {
      data.push_back({"u" + std::to_string(k), "i", 1.0,
                      static_cast<std::int64_t>(rng.uniform_index(20))});
    }
    const auto split = temporal_split(data, 0.2, 0.2);
    CHECK(split.train.size() + split.validation.size() + split.test.size() == n);

    std::multiset<std::string> seen;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
      for (const auto& r : *part) seen.insert(r.user);
    }
    std::multiset<std::string> expected;
    for (const auto& r : data) expected.insert(r.user);
    CHECK(seen == expected);

    auto max_ts = [](const std::vector<Interaction>& v) {
      std::int64_t m = -1;
      for (const auto& r : v) m = std::max(m, r.timestamp);
      return m;
    };
    auto min_ts = [](const std::vector<Interaction>& v) {
      std::int64_t m = std::numeric_limits<std::int64_t>::max();
      for (const auto& r : v) m = std::min(m, r.timestamp);
      return m;
    };
    CHECK(max_ts(split.train) <= min_ts(split.validation));
    CHECK(max_ts(split.validation) <= min_ts(split.test));
    CHECK(max_ts(split.train) <= min_ts(split.test));
  }
}

TEST_CASE("catalog_stats") {
  const auto catalog = make_catalog({{"f1", "p", "F"}, {"f2", "p", "F"}, {"m1", "q", "M"}});
  SUBCASE("all train interactions on F items") {
    DatasetSplit split;
    split.train = rows({{"a", "f1"}, {"b", "f2"}});
    split.test = rows({{"a", "m1"}});
    const auto stats = catalog_stats(split, catalog);
    CHECK(stats.users == 2);
    CHECK(stats.catalog_items == 3);
    CHECK(stats.interactions_total == 3);
    CHECK(stats.interactions_train == 2);
    CHECK(stats.train_group_share.at("F") == 1.0);
    CHECK(stats.unknown_items == 0);
  }
  SUBCASE("items outside the catalog are UNKNOWN") {
    DatasetSplit split;
    split.train = rows({{"a", "f1"}, {"a", "mystery"}, {"b", "m1"}, {"b", "mystery"}});
    const auto stats = catalog_stats(split, catalog);
    CHECK(stats.unknown_items == 1);
    CHECK(stats.train_group_share.at(std::string(kUnknownGroup)) == 0.5);
    CHECK(stats.train_group_share.at("F") == 0.25);
    const auto csv = to_csv(stats, {"F", "M", std::string(kUnknownGroup)});
    CHECK(csv.find("train_share_UNKNOWN") != std::string::npos);
    CHECK(to_json(stats)["unknown_items"] == 1);
  }
}

TEST_CASE("TrainIndex rows follow identifier order") {
  const auto data = rows({{"ub", "y"}, {"ua", "x"}, {"ub", "x"}, {"ub", "x"}});
  const TrainIndex index(data);
  CHECK(index.users() == std::vector<std::string>{"ua", "ub"});
  CHECK(index.items() == std::vector<std::string>{"x", "y"});
  CHECK(index.user_items(1) == std::vector<std::uint32_t>{0, 1});
  CHECK(index.user_interactions(1) == 3);
  CHECK(index.has_item(0, 0));
  CHECK_FALSE(index.has_item(0, 1));
  CHECK(index.find_item("y") == 1u);
  CHECK_FALSE(index.find_user("nobody").has_value());
}

TEST_CASE("save_interactions round-trips") {
  TempDir dir("ds");
  const std::vector<Interaction> data = {{"u1", "i1", 4.5, 10}, {"u2", "i9", 0.1, 0}};
  save_interactions(dir / "x.tsv", data);
  CHECK(load_interactions(dir / "x.tsv") == data);
}
