#include <doctest.h>

#include <cmath>

#include "fairbpr/errors.hpp"
#include "fairbpr/eval.hpp"
#include "test_util.hpp"

using namespace fairbpr;

namespace {

double sum_shares(const GroupShares& shares) {
  double s = 0.0;
  for (const auto& [_, v] : shares) s += v;
  return s;
}

}  // namespace

TEST_CASE("ndcg_at_k") {
  const RankedList list{"u", {"a", "b", "c", "d"}, 4};
  CHECK(ndcg_at_k(list, {"a", "b", "c", "d"}, 4).value() == doctest::Approx(1.0));
  CHECK(ndcg_at_k(list, {"a", "b"}, 10).value() == doctest::Approx(1.0));
  CHECK(ndcg_at_k(list, {"z"}, 10).value() == 0.0);
  CHECK_FALSE(ndcg_at_k(list, {}, 10).has_value());
  CHECK_THROWS_AS(ndcg_at_k(list, {"a"}, 0), DomainError);

  // Single relevant item at rank 2: 1/log2(3).
  const RankedList ten{"u", {"x", "r", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9"}, 10};
  CHECK(ndcg_at_k(ten, {"r"}, 10).value() == doctest::Approx(0.6309297535714575).epsilon(1e-15));
}

TEST_CASE("ndcg is 1 exactly when the top ranks are all relevant") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    RankedList list{"u", {}, 8};
    for (int r = 0; r < 8; ++r) list.items.push_back("i" + std::to_string(r));
    std::unordered_set<std::string> relevant;
    for (int r = 0; r < 12; ++r) {
      if (rng.uniform01() < 0.4) relevant.insert("i" + std::to_string(r));
    }
    if (relevant.empty()) continue;
    const std::size_t k = 1 + rng.uniform_index(8);
    const double value = ndcg_at_k(list, relevant, k).value();
    CHECK(value >= 0.0);
    CHECK(value <= 1.0 + 1e-12);
    bool ideal = true;
    for (std::size_t r = 0; r < std::min(k, relevant.size()); ++r) {
      ideal &= relevant.count(list.items[r]) > 0;
    }
    CHECK((std::abs(value - 1.0) < 1e-12) == ideal);
  }
}

TEST_CASE("group_slot_share") {
  const auto catalog = make_catalog({{"f1", "p", "F"}, {"f2", "p", "F"}, {"m1", "q", "M"},
                                     {"m2", "q", "M"}});
  SUBCASE("all F") {
    const std::vector<RankedList> lists = {{"a", {"f1", "f2"}, 2}, {"b", {"f2", "f1"}, 2}};
    const auto shares = group_slot_share(lists, catalog, 2);
    CHECK(shares.at("F") == 1.0);
    CHECK(shares.size() == 1);
  }
  SUBCASE("F,M / M,M") {
    const std::vector<RankedList> lists = {{"a", {"f1", "m1"}, 2}, {"b", {"m1", "m2"}, 2}};
    const auto shares = group_slot_share(lists, catalog, 2);
    CHECK(shares.at("F") == 0.25);
    CHECK(shares.at("M") == 0.75);
  }
  SUBCASE("truncates to k and tracks unlabeled items") {
    const std::vector<RankedList> lists = {{"a", {"zz", "f1", "m1"}, 3}};
    const auto shares = group_slot_share(lists, catalog, 2);
    CHECK(shares.at("UNKNOWN") == 0.5);
    CHECK(shares.at("F") == 0.5);
    CHECK(shares.count("M") == 0);
  }
  SUBCASE("no slots") { CHECK(group_slot_share({}, catalog, 10).empty()); }
}

TEST_CASE("group_weighted_exposure") {
  const auto catalog = make_catalog({{"f", "p", "F"}, {"m", "q", "M"}, {"m2", "q", "M"}});
  const std::vector<RankedList> same = {{"a", {"m", "m2"}, 2}};
  CHECK(group_weighted_exposure(same, catalog, 2).at("M") == 1.0);

  const std::vector<RankedList> fm = {{"a", {"f", "m"}, 2}};
  const auto shares = group_weighted_exposure(fm, catalog, 2);
  CHECK(shares.at("F") == doctest::Approx(0.6131471927654584).epsilon(1e-15));
  CHECK(shares.at("M") == doctest::Approx(1.0 - 0.6131471927654584).epsilon(1e-15));
}

TEST_CASE("exposure properties on random lists") {
  std::vector<GroupAssignment> a;
  for (int i = 0; i < 60; ++i) {
    a.push_back({"i" + std::to_string(i), "p", i % 3 == 0 ? "F" : (i % 3 == 1 ? "M" : "X")});
  }
  const auto catalog = make_catalog(a);
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RankedList> lists;
    for (int u = 0; u < 10; ++u) {
      RankedList list{"u" + std::to_string(u), {}, 10};
      for (int r = 0; r < 10; ++r) list.items.push_back("i" + std::to_string(rng.uniform_index(70)));
      lists.push_back(list);
    }
    const auto slot = group_slot_share(lists, catalog, 10);
    const auto weighted = group_weighted_exposure(lists, catalog, 10);
    CHECK(std::abs(sum_shares(slot) - 1.0) <= 1e-9);
    CHECK(std::abs(sum_shares(weighted) - 1.0) <= 1e-9);

    // Drop F items everywhere: F vanishes, the rest renormalize.
    auto without = lists;
    for (auto& list : without) {
      std::erase_if(list.items, [&](const auto& i) { return catalog.group_of(i) == "F"; });
    }
    const auto slot_wo = group_slot_share(without, catalog, 10);
    CHECK(slot_wo.count("F") == 0);
    const double rest = 1.0 - slot.at("F");
    CHECK(slot_wo.at("M") == doctest::Approx(slot.at("M") / rest).epsilon(1e-12));
  }
}

TEST_CASE("shared per-rank group pattern: exposure is the pattern's discount mass") {
  const auto catalog = make_catalog({{"f", "p", "F"}, {"m", "q", "M"}, {"m2", "q", "M"}});
  // Every list is F,M,M,F at ranks 1..4 (the identifiers differ, the groups do not).
  const std::vector<RankedList> lists = {{"a", {"f", "m", "m2", "f"}, 4},
                                         {"b", {"f", "m2", "m", "f"}, 4}};
  const auto slot = group_slot_share(lists, catalog, 4);
  const auto weighted = group_weighted_exposure(lists, catalog, 4);
  // The shares differ unless every rank holds the same group.
  const double w1 = 1.0, w2 = 1 / std::log2(3.0), w3 = 0.5, w4 = 1 / std::log2(5.0);
  CHECK(weighted.at("F") == doctest::Approx((w1 + w4) / (w1 + w2 + w3 + w4)));
  CHECK(slot.at("F") == 0.5);

  const std::vector<RankedList> uniform = {{"a", {"f", "f"}, 2}, {"b", {"f", "f"}, 2}};
  CHECK(group_slot_share(uniform, catalog, 2) == group_weighted_exposure(uniform, catalog, 2));
}

TEST_CASE("weighted exposure tracks slot share under random group assignment") {
  std::vector<GroupAssignment> a;
  Rng rng(19);
  for (int i = 0; i < 500; ++i) {
    a.push_back({"i" + std::to_string(i), "p", rng.uniform01() < 0.2 ? "F" : "M"});
  }
  const auto catalog = make_catalog(a);
  std::vector<RankedList> lists;
  for (int u = 0; u < 3000; ++u) {
    RankedList list{"u", {}, 10};
    for (int r = 0; r < 10; ++r) list.items.push_back("i" + std::to_string(rng.uniform_index(500)));
    lists.push_back(std::move(list));
  }
  const double slot = group_slot_share(lists, catalog, 10).at("F");
  const double weighted = group_weighted_exposure(lists, catalog, 10).at("F");
  CHECK(std::abs(slot - weighted) <= 0.01);
}

TEST_CASE("fairness_report") {
  // Two users; F items carry large scores so every list is all-F.
  FactorModel model({"u1", "u2"}, {"f1", "f2", "f3", "m1", "m2"}, 1);
  model.user_vector(0)[0] = 1.0;
  model.user_vector(1)[0] = 1.0;
  const double values[] = {5.0, 4.0, 3.0, 1.0, 0.5};
  for (std::uint32_t i = 0; i < 5; ++i) model.item_vector(i)[0] = values[i];
  const auto catalog = make_catalog({{"f1", "p", "F"}, {"f2", "p", "F"}, {"f3", "p", "F"},
                                     {"m1", "q", "M"}, {"m2", "q", "M"}});
  DatasetSplit split;
  split.train = {{"u1", "m1", 1, 0}, {"u2", "m2", 1, 0}};
  split.test = {{"u1", "f1", 1, 5}, {"u2", "m1", 1, 6}, {"ghost", "f1", 1, 7}};

  const auto report = fairness_report(model, split, catalog, {2, 3}, CompositionAudit{},
                                      {{"tag", "x"}});
  CHECK(report.slot_share.at(2).at("F") == 1.0);
  CHECK(report.weighted_exposure.at(3).at("F") == 1.0);
  CHECK(report.list_users == 2);
  CHECK(report.ndcg_users == 2);
  // u1: f1 at rank 1 -> 1. u2: m1 absent from top-2 -> 0.
  CHECK(report.ndcg.at(2) == doctest::Approx(0.5));
  // k = 3: u2 list f1,f2,f3 still misses m1.
  CHECK(report.ndcg.at(3) == doctest::Approx(0.5));

  const auto j = to_json(report);
  CHECK(j["ndcg"].contains("2"));
  CHECK(j["slot_share"]["3"]["F"] == 1.0);
  CHECK(j["config"]["tag"] == "x");
  CHECK(j.contains("triplet_audit"));
  const auto csv = to_csv(report);
  CHECK(csv.rfind("k,ndcg,group,slot_share,weighted_exposure\n", 0) == 0);

  DatasetSplit no_test = split;
  no_test.test.clear();
  CHECK_THROWS_AS(fairness_report(model, no_test, catalog, {10}, {}), Error);
}
