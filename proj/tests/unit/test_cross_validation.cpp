#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "tunekit/cross_validation.hpp"
#include "tunekit/errors.hpp"

using namespace tunekit;

namespace {

std::vector<std::size_t> fold_sizes(const FoldPlan& plan, std::size_t it) {
  std::vector<std::size_t> s(plan.num_folds, 0);
  for (auto f : plan.assignments[it]) ++s.at(f);
  return s;
}

// Random disjoint strata and clusters over [0, n); some indices stay ungrouped.
GroupingSpec random_grouping(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  GroupingSpec g;
  std::size_t pos = 0;
  std::uniform_int_distribution<int> kind(0, 2);
  while (pos < n) {
    const std::size_t len = std::min<std::size_t>(n - pos, 1 + rng() % 6);
    IndexSet set(idx.begin() + static_cast<long>(pos), idx.begin() + static_cast<long>(pos + len));
    switch (kind(rng)) {
      case 0: g.strata.push_back(set); break;
      case 1: g.clusters.push_back(set); break;
      default: break;
    }
    pos += len;
  }
  return g;
}

std::size_t units_of(std::size_t n, const GroupingSpec& g) {
  std::size_t clustered = 0;
  for (const auto& c : g.clusters) clustered += c.size();
  return n - clustered + g.clusters.size();
}

}  // namespace

TEST_CASE("n = k gives singleton folds") {
  const auto plan = generate_folds(10, 10, 1);
  CHECK(fold_sizes(plan, 0) == std::vector<std::size_t>(10, 1));
}

TEST_CASE("ungrouped sizes for n=10, k=3") {
  auto s = fold_sizes(generate_folds(10, 3, 1, {}, 4), 0);
  std::sort(s.begin(), s.end());
  CHECK(s == std::vector<std::size_t>{3, 3, 4});
}

TEST_CASE("a stratum of four over four folds puts one member in each") {
  GroupingSpec g;
  g.strata = {{1, 4, 6, 9}};
  const auto plan = generate_folds(12, 4, 3, g, 8);
  for (std::size_t it = 0; it < 3; ++it) {
    std::set<std::size_t> folds;
    for (auto i : g.strata[0]) folds.insert(plan.assignments[it][i]);
    CHECK(folds.size() == 4);
  }
}

TEST_CASE("a cluster shares one fold in every iteration") {
  GroupingSpec g;
  g.clusters = {{2, 5, 7}};
  for (std::size_t k = 2; k <= 8; ++k) {
    const auto plan = generate_folds(10, k, 3, g, k);
    for (const auto& a : plan.assignments) {
      CHECK(a[2] == a[5]);
      CHECK(a[5] == a[7]);
    }
  }
}

TEST_CASE("fold plan properties over random cases") {
  std::mt19937_64 rng(31337);
  int checked = 0;
  while (checked < 500) {
    const std::size_t n = 2 + rng() % 60;
    const auto g = random_grouping(n, rng);
    const std::size_t units = units_of(n, g);
    if (units < 2) continue;
    const std::size_t k = 2 + rng() % (units - 1);
    const std::size_t r = 1 + rng() % 3;
    const std::uint64_t seed = rng();
    const auto plan = generate_folds(n, k, r, g, seed);
    CHECK(plan == generate_folds(n, k, r, g, seed));
    REQUIRE(plan.assignments.size() == r);

    std::size_t biggest_cluster = 1;
    for (const auto& c : g.clusters) biggest_cluster = std::max(biggest_cluster, c.size());

    for (std::size_t it = 0; it < r; ++it) {
      const auto& a = plan.assignments[it];
      REQUIRE(a.size() == n);
      std::vector<std::size_t> seen;
      for (std::size_t f = 0; f < k; ++f) {
        const auto test = plan.test_indices(it, f);
        const auto train = plan.train_indices(it, f);
        CHECK(test.size() + train.size() == n);
        seen.insert(seen.end(), test.begin(), test.end());
      }
      std::sort(seen.begin(), seen.end());
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      CHECK(seen == all);

      for (const auto& s : g.strata) {
        std::vector<std::size_t> per(k, 0);
        for (auto i : s) ++per[a[i]];
        CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
      }
      for (const auto& c : g.clusters) {
        std::set<std::size_t> folds;
        for (auto i : c) folds.insert(a[i]);
        CHECK(folds.size() == 1);
      }
      const auto sizes = fold_sizes(plan, it);
      const auto spread = *std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end());
      CHECK(spread <= (g.clusters.empty() ? 1 : biggest_cluster));
      CHECK(*std::min_element(sizes.begin(), sizes.end()) >= 1);
    }
    ++checked;
  }
}

TEST_CASE("iterations differ and seeds matter") {
  const auto plan = generate_folds(40, 5, 2, {}, 1);
  CHECK(plan.assignments[0] != plan.assignments[1]);
  CHECK(generate_folds(40, 5, 1, {}, 1).assignments[0] != generate_folds(40, 5, 1, {}, 2).assignments[0]);
  CHECK(generate_folds(40, 5, 1, {}, 1).assignments[0] == plan.assignments[0]);
}

TEST_CASE("fold generation errors") {
  CHECK_THROWS_AS(generate_folds(10, 1, 1), InvalidFoldCount);
  CHECK_THROWS_AS(generate_folds(10, 11, 1), InvalidFoldCount);
  CHECK_THROWS_AS(generate_folds(10, 2, 0), InvalidFoldCount);
  CHECK_THROWS_AS(generate_folds(4, 3, 1, {.strata = {}, .clusters = {{0, 1, 2}}}), InvalidFoldCount);
  CHECK_NOTHROW(generate_folds(4, 2, 1, {.strata = {}, .clusters = {{0, 1, 2}}}));
  CHECK_THROWS_AS(generate_folds(6, 2, 1, {.strata = {{0, 1}, {1, 2}}, .clusters = {}}), OverlappingGroups);
  CHECK_THROWS_AS(generate_folds(6, 2, 1, {.strata = {}, .clusters = {{0, 1}, {1, 2}}}), OverlappingGroups);
  CHECK_THROWS_AS(generate_folds(6, 2, 1, {.strata = {{0, 3}}, .clusters = {{3, 4}}}), OverlappingGroups);
  CHECK_THROWS_AS(generate_folds(6, 2, 1, {.strata = {{0, 6}}, .clusters = {}}), IndexOutOfRange);
}

TEST_CASE("cross-validated score calls inner once per cell") {
  const auto plan = generate_folds(100, 10, 2, {}, 3);
  int calls = 0;
  std::set<std::pair<std::size_t, std::size_t>> tests;
  const double v = cross_validated_score(
      [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        ++calls;
        CHECK(train.size() + test.size() == 100);
        tests.emplace(test.front(), test.size());
        return 0.7;
      },
      plan);
  CHECK(calls == 20);
  CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("two folds scoring 0.5 and 1.0 average to 0.75") {
  const auto plan = generate_folds(6, 2, 1, {}, 0);
  const double v = cross_validated_score(
      [&](std::span<const std::size_t>, std::span<const std::size_t> test) {
        return plan.assignments[0][test.front()] == 0 ? 0.5 : 1.0;
      },
      plan);
  CHECK(v == 0.75);
}

TEST_CASE("aggregation is ordered and independent of parallelism") {
  const auto plan = generate_folds(30, 5, 3, {}, 12);
  const FoldScorer inner = [](std::span<const std::size_t> train, std::span<const std::size_t> test) {
    double s = 0.0;
    for (auto i : test) s += std::sin(static_cast<double>(i) + 0.1 * static_cast<double>(train.size()));
    return s;
  };
  std::vector<double> seen_seq, seen_par;
  const Aggregator record_seq = [&](std::span<const double> v) {
    seen_seq.assign(v.begin(), v.end());
    return v[0];
  };
  const Aggregator record_par = [&](std::span<const double> v) {
    seen_par.assign(v.begin(), v.end());
    return v[0];
  };
  cross_validated_score(inner, plan, record_seq, 1);
  cross_validated_score(inner, plan, record_par, 8);
  CHECK(seen_seq.size() == 15);
  CHECK(seen_seq == seen_par);
  CHECK(seen_seq[7] == inner(plan.train_indices(1, 2), plan.test_indices(1, 2)));
}

TEST_CASE("a failing fold is reported with its coordinates") {
  const auto plan = generate_folds(20, 4, 2, {}, 5);
  for (std::size_t par : {1, 6}) {
    std::atomic<int> calls{0};
    try {
      cross_validated_score(
          [&](std::span<const std::size_t>, std::span<const std::size_t> test) -> double {
            ++calls;
            const std::vector<std::size_t> t(test.begin(), test.end());
            if (t == plan.test_indices(1, 2)) throw std::runtime_error("singular matrix");
            if (t == plan.test_indices(1, 3)) throw std::runtime_error("later failure");
            return 1.0;
          },
          plan, mean_aggregator, par);
      FAIL("expected FoldFailure");
    } catch (const FoldFailure& e) {
      CHECK(e.iteration() == 1);
      CHECK(e.fold() == 2);
      CHECK(std::string(e.what()).find("singular matrix") != std::string::npos);
    }
  }
}

TEST_CASE("cross-validated objective passes only index sets and params") {
  const auto plan = generate_folds(50, 10, 2, {}, 0);
  std::atomic<int> calls{0};
  CrossValidatedObjective f(
      [&](std::span<const std::size_t> train, std::span<const std::size_t> test, const ParamVector& p) {
        ++calls;
        return p.at("C") + static_cast<double>(test.size()) / static_cast<double>(train.size() + test.size());
      },
      plan);
  const double v = f.evaluate(ParamVector({"C"}, {2.0}));
  CHECK(calls == 20);
  CHECK(v == doctest::Approx(2.1));
  CHECK(f.plan() == plan);
  CHECK_FALSE(f.concurrent_safe());
}

TEST_CASE("fold plan JSON round-trip") {
  GroupingSpec g;
  g.clusters = {{0, 1}};
  const auto plan = generate_folds(6, 3, 2, g, 9);
  const auto j = to_json(plan);
  CHECK(j["n"] == 6);
  CHECK(j["k"] == 3);
  CHECK(j["r"] == 2);
  CHECK(fold_plan_from_json(j) == plan);
  auto bad = j;
  bad["assignments"][0][0] = 3;
  CHECK_THROWS(fold_plan_from_json(bad));
}
