#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fsnc/metrics.hpp"
#include "fsnc/rng.hpp"

#include <cmath>
#include <functional>
#include <map>

using namespace fsnc;

namespace {

// Independent reference ARI: literal pair counting over all point pairs.
double oracle_ari(const std::vector<int>& a, const std::vector<int>& b) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) n11++;
      else if (sa && !sb) n10++;
      else if (!sa && sb) n01++;
      else n00++;
    }
  const double denom = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00);
  if (denom == 0.0) return 1.0;
  return 2.0 * (n11 * n00 - n10 * n01) / denom;
}

// Independent reference NMI via the joint-entropy route:
// MI = H(A) + H(B) - H(A,B), normalized by the mean of the marginal entropies.
double oracle_nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  auto entropy = [&](const std::map<std::vector<int>, std::size_t>& counts) {
    double h = 0.0;
    for (const auto& [key, c] : counts) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  std::map<std::vector<int>, std::size_t> ca, cb, cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[{a[i]}]++;
    cb[{b[i]}]++;
    cab[{a[i], b[i]}]++;
  }
  const double ha = entropy(ca), hb = entropy(cb);
  if (ha + hb == 0.0) return 1.0;
  const double mi = std::max(0.0, ha + hb - entropy(cab));
  return mi / (0.5 * (ha + hb));
}

// All set partitions of n items as restricted growth strings.
void enum_partitions(std::size_t n, const std::function<void(const std::vector<int>&)>& cb) {
  std::vector<int> s(n, 0);
  std::function<void(std::size_t, int)> gen = [&](std::size_t i, int mx) {
    if (i == n) {
      cb(s);
      return;
    }
    for (int v = 0; v <= mx + 1; ++v) {
      s[i] = v;
      gen(i + 1, std::max(mx, v));
    }
  };
  gen(1, 0);
}

Matrix three_blobs(std::size_t per, std::uint64_t seed, std::vector<int>* labels) {
  Rng rng(seed);
  Matrix m(3 * per, 2);
  const double cx[3] = {0.0, 10.0, 0.0};
  const double cy[3] = {0.0, 0.0, 10.0};
  for (std::size_t i = 0; i < 3 * per; ++i) {
    const std::size_t c = i / per;
    labels->push_back(static_cast<int>(c));
    m(i, 0) = cx[c] + 0.3 * rng.normal();
    m(i, 1) = cy[c] + 0.3 * rng.normal();
  }
  return m;
}

}  // namespace

TEST_CASE("confidence interval: frozen oracle values") {
  CHECK(confidence_interval({}) == 0.0);
  CHECK(confidence_interval({0.8}) == 0.0);
  CHECK(confidence_interval({0.6, 0.6, 0.6, 0.6}) == doctest::Approx(0.0).epsilon(1e-12));
  // std({0.5,0.7}) = 0.141421..., 1.96 * 0.141421 / sqrt(2) = 0.196
  CHECK(confidence_interval({0.5, 0.7}) == doctest::Approx(0.196).epsilon(1e-6));
}

TEST_CASE("nmi/ari hand values") {
  const std::vector<int> same = {0, 0, 1, 1, 2};
  CHECK(nmi(same, same) == doctest::Approx(1.0));
  CHECK(ari(same, same) == doctest::Approx(1.0));

  // renaming cluster ids changes nothing (ids need not be dense)
  const std::vector<int> renamed = {7, 7, -2, -2, 40};
  CHECK(nmi(same, renamed) == doctest::Approx(1.0));
  CHECK(ari(same, renamed) == doctest::Approx(1.0));

  // independent checkerboard: MI exactly 0, ARI exactly -1/2
  const std::vector<int> a = {0, 0, 1, 1}, b = {0, 1, 0, 1};
  CHECK(nmi(a, b) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ari(a, b) == doctest::Approx(-0.5));

  // one trivial partition: NMI 0 (no information), ARI 0 (chance level)
  const std::vector<int> triv = {5, 5, 5, 5};
  CHECK(nmi(triv, b) == doctest::Approx(0.0));
  CHECK(ari(triv, b) == doctest::Approx(0.0));

  // both trivial: defined as perfect agreement
  CHECK(nmi(triv, triv) == doctest::Approx(1.0));
  CHECK(ari(triv, triv) == doctest::Approx(1.0));

  CHECK_THROWS_AS(nmi({0, 1}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(ari({}, {}), std::invalid_argument);
}

TEST_CASE("nmi/ari agree with brute-force oracles on every partition pair, n <= 5") {
  for (std::size_t n : {2, 3, 4, 5}) {
    std::vector<std::vector<int>> parts;
    enum_partitions(n, [&](const std::vector<int>& p) { parts.push_back(p); });
    for (const auto& pa : parts)
      for (const auto& pb : parts) {
        REQUIRE(std::fabs(nmi(pa, pb) - oracle_nmi(pa, pb)) < 1e-9);
        REQUIRE(std::fabs(ari(pa, pb) - oracle_ari(pa, pb)) < 1e-9);
      }
  }
}

TEST_CASE("nmi/ari agree with brute-force oracles on random labelings, n = 8") {
  Rng rng(123);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<int> a(8), b(8);
    for (auto& v : a) v = static_cast<int>(rng.below(4));
    for (auto& v : b) v = static_cast<int>(rng.below(3));
    REQUIRE(std::fabs(nmi(a, b) - oracle_nmi(a, b)) < 1e-9);
    REQUIRE(std::fabs(ari(a, b) - oracle_ari(a, b)) < 1e-9);
  }
}

TEST_CASE("kmeans recovers separated blobs and is deterministic") {
  std::vector<int> labels;
  Matrix pts = three_blobs(12, 9, &labels);
  KmeansResult r1 = kmeans(pts, 3, 42);
  KmeansResult r2 = kmeans(pts, 3, 42);
  CHECK(r1.assignment == r2.assignment);
  CHECK(r1.inertia == doctest::Approx(r2.inertia));
  CHECK(ari(labels, r1.assignment) == doctest::Approx(1.0));
  CHECK(nmi(labels, r1.assignment) == doctest::Approx(1.0));
}

TEST_CASE("kmeans edge shapes: k=1 and k=n") {
  std::vector<int> labels;
  Matrix pts = three_blobs(4, 11, &labels);
  KmeansResult one = kmeans(pts, 1, 5);
  for (int c : one.assignment) CHECK(c == 0);
  // k=1 inertia equals total sum of squared deviations from the mean
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    mx += pts(i, 0);
    my += pts(i, 1);
  }
  mx /= static_cast<double>(pts.rows());
  my /= static_cast<double>(pts.rows());
  double ss = 0;
  for (std::size_t i = 0; i < pts.rows(); ++i)
    ss += (pts(i, 0) - mx) * (pts(i, 0) - mx) + (pts(i, 1) - my) * (pts(i, 1) - my);
  CHECK(one.inertia == doctest::Approx(ss));

  KmeansResult all = kmeans(pts, pts.rows(), 5);
  CHECK(all.inertia == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(kmeans(pts, pts.rows() + 1, 5), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(pts, 0, 5), std::invalid_argument);
}

TEST_CASE("kmeans survives heavy duplication (empty-cluster repair path)") {
  // 10 copies of two distinct points, k = 4: at most 2 natural clusters, so
  // seeding lands duplicates and repair must keep every cluster non-empty.
  Matrix pts(20, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    pts(i, 0) = i < 10 ? 0.0 : 5.0;
    pts(i, 1) = 0.0;
  }
  KmeansResult r = kmeans(pts, 4, 7);
  REQUIRE(r.assignment.size() == 20);
  std::vector<std::size_t> count(4, 0);
  for (int c : r.assignment) {
    REQUIRE(c >= 0);
    REQUIRE(c < 4);
    count[static_cast<std::size_t>(c)]++;
  }
  for (std::size_t c = 0; c < 4; ++c) CHECK(count[c] > 0);
  CHECK(std::isfinite(r.inertia));
}

TEST_CASE("clustering_scores ties embeddings, node lists and labels together") {
  std::vector<int> labels;
  Matrix pts = three_blobs(10, 21, &labels);
  std::vector<std::size_t> nodes(pts.rows());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
  ClusteringScores s = clustering_scores(pts, nodes, labels, 3, 77);
  CHECK(s.nmi == doctest::Approx(1.0));
  CHECK(s.ari == doctest::Approx(1.0));

  // scoring only the first blob against constant labels: trivial vs trivial-ish
  std::vector<std::size_t> sub(nodes.begin(), nodes.begin() + 10);
  std::vector<int> sub_labels(10, 0);
  ClusteringScores s1 = clustering_scores(pts, sub, sub_labels, 1, 3);
  CHECK(s1.nmi == doctest::Approx(1.0));
  CHECK(s1.ari == doctest::Approx(1.0));

  CHECK_THROWS_AS(clustering_scores(pts, sub, labels, 2, 3), std::invalid_argument);
}
