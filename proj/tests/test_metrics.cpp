#include <cmath>
#include <vector>

#include "doctest.h"
#include "sil/metrics.hpp"
#include "sil/rng.hpp"

using namespace sil;

namespace {
using V = std::vector<double>;
}

TEST_CASE("pearson") {
  CHECK(pearson(V{1, 2, 3}, V{1, 2, 3}) == 1.0);
  CHECK(pearson(V{1, 2, 3}, V{3, 2, 1}) == -1.0);
  // 3.5 / sqrt(5 * 4.75)
  CHECK(pearson(V{1, 2, 3, 4}, V{2, 4, 5, 4}) == doctest::Approx(0.7181848464).epsilon(1e-9));
  CHECK_THROWS_AS(pearson(V{1, 1, 1}, V{1, 2, 3}), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson(V{1}, V{1}), ContractViolation);
  CHECK_THROWS_AS(pearson(V{1, 2}, V{1, 2, 3}), ContractViolation);

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    V x(10), y(10);
    for (auto& v : x) v = rng.uniform(-3, 3);
    for (auto& v : y) v = rng.uniform(-3, 3);
    const double r = pearson(x, y);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(pearson(y, x) == doctest::Approx(r).epsilon(1e-15));
    V x2 = x, y2 = y;
    const double a = rng.uniform(0.1, 5), b = rng.uniform(-5, 5);
    for (auto& v : x2) v = a * v + b;
    for (auto& v : y2) v = (v - 1) / 6;
    CHECK(std::abs(pearson(x2, y2) - r) <= 1e-12);
  }
}

TEST_CASE("mse and mean") {
  CHECK(mean_squared_error(V{1, 2}, V{1, 4}) == 2.0);
  CHECK(mean(V{1, 2, 6}) == 3.0);
  CHECK_THROWS_AS(mean(V{}), ContractViolation);
  CHECK(sorted_quantile(V{0, 10}, 0.25) == 2.5);
  CHECK(sorted_quantile(V{4}, 0.9) == 4.0);
}

TEST_CASE("bootstrap_ceiling") {
  CHECK(bootstrap_ceiling({{3, 3, 3}, {5, 5}, {1, 1, 1, 1}}, 50, 1) == 1.0);
  CHECK_THROWS_AS(bootstrap_ceiling({{1, 2}, {3, 4}}, 0, 1), ContractViolation);
  CHECK_THROWS_AS(bootstrap_ceiling({{1, 2}, {}}, 10, 1), ContractViolation);

  Rng rng(21);
  std::vector<V> items(200);
  for (auto& item : items) {
    const double centre = rng.uniform(1.5, 6.5);
    for (int p = 0; p < 12; ++p) item.push_back(std::clamp(std::round(centre + rng.uniform(-2, 2)), 1.0, 7.0));
  }
  const double a = bootstrap_ceiling(items, 1000, 1);
  CHECK(a == bootstrap_ceiling(items, 1000, 1));
  CHECK(a > 0.5);
  CHECK(a < 1.0);
  CHECK(std::abs(bootstrap_ceiling(items, 1000, 2) - a) <= 0.02);
}

TEST_CASE("bootstrap_ci") {
  SUBCASE("identical values") {
    const auto ci = bootstrap_mean_ci(V{2.5, 2.5, 2.5}, 500, 0.95, 3);
    CHECK(ci.mean == 2.5);
    CHECK(ci.lo == 2.5);
    CHECK(ci.hi == 2.5);
  }
  SUBCASE("[0,1] with large B") {
    const auto ci = bootstrap_mean_ci(V{0, 1}, 10000, 0.95, 4);
    CHECK(ci.mean == 0.5);
    CHECK(ci.lo == 0.0);
    CHECK(ci.hi == 1.0);
  }
  SUBCASE("lo <= mean <= hi over 1000 random groups") {
    Rng rng(5);
    std::map<std::string, V> groups;
    for (int g = 0; g < 1000; ++g) {
      V values(1 + rng.below(30));
      for (auto& v : values) v = rng.uniform(0, 1) < 0.2 ? rng.uniform(0, 10) : rng.uniform(0, 1);
      groups["g" + std::to_string(g)] = values;
    }
    const auto cis = bootstrap_ci(groups, 200, 0.95, 6);
    CHECK(cis.size() == 1000);
    for (const auto& [key, ci] : cis) {
      CHECK(ci.lo <= ci.mean);
      CHECK(ci.mean <= ci.hi);
    }
    CHECK(bootstrap_ci(groups, 200, 0.95, 6).at("g7").lo == cis.at("g7").lo);
  }
  SUBCASE("zero replicates give a point interval") {
    const auto ci = bootstrap_mean_ci(V{1, 2, 3}, 0, 0.95, 1);
    CHECK(ci.lo == 2.0);
    CHECK(ci.hi == 2.0);
  }
}
