#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fsnc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace fsnc;

TEST_CASE("same seed, same stream; different seed, different stream") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    auto x = a.next(), y = b.next(), z = c.next();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) and has a sane mean") {
  Rng rng(42);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("normal has roughly zero mean and unit variance") {
  Rng rng(99);
  double sum = 0.0, sq = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("below is in range and hits every residue") {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("sample_indices draws distinct values and respects bounds") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    auto s = rng.sample_indices(20, 8);
    REQUIRE(s.size() == 8);
    std::set<std::size_t> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 8);
    CHECK(*std::max_element(s.begin(), s.end()) < 20);
  }
  CHECK_THROWS_AS(rng.sample_indices(3, 4), std::invalid_argument);
  CHECK(rng.sample_indices(0, 0).empty());
}

TEST_CASE("shuffle is a permutation and is seed-stable") {
  std::vector<int> v1 = {0, 1, 2, 3, 4, 5, 6, 7};
  auto v2 = v1, sorted = v1;
  Rng a(31), b(31);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::sort(v2.begin(), v2.end());
  CHECK(v2 == sorted);
}

TEST_CASE("derive_seed separates sibling and nested paths") {
  const std::uint64_t base = 1234;
  CHECK(derive_seed(base, {1}) == derive_seed(base, {1}));
  CHECK(derive_seed(base, {1}) != derive_seed(base, {2}));
  CHECK(derive_seed(base, {1, 0}) != derive_seed(base, {1, 1}));
  CHECK(derive_seed(base, {1, 0}) != derive_seed(base, {1}));
  CHECK(derive_seed(base, {}) != derive_seed(base + 1, {}));
  // path components are positional: {a,b} and {b,a} must differ
  CHECK(derive_seed(base, {3, 5}) != derive_seed(base, {5, 3}));
}
