#include "fsnc/metrics.hpp"

#include "fsnc/rng.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace fsnc {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

KmeansResult kmeans_once(const Matrix& points, std::size_t k, std::uint64_t seed,
                         std::size_t max_iters) {
  const std::size_t n = points.rows(), d = points.cols();
  Rng rng(seed);

  // k-means++ seeding
  Matrix centers(k, d);
  std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  for (std::size_t j = 0; j < d; ++j) centers(0, j) = points(first, j);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best_d2[i] = std::min(best_d2[i], sq_dist(points.row(i), centers.row(c - 1), d));
      total += best_d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;  // guard against fp round-off at the end of the walk
      for (std::size_t i = 0; i < n; ++i) {
        acc += best_d2[i];
        if (acc >= r && best_d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));  // all duplicates
    }
    for (std::size_t j = 0; j < d; ++j) centers(c, j) = points(pick, j);
  }

  std::vector<int> assign(n, -1);
  std::vector<double> dist_to_center(n, 0.0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    bool changed = false;
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(points.row(i), centers.row(0), d);
      for (std::size_t c = 1; c < k; ++c) {
        const double dd = sq_dist(points.row(i), centers.row(c), d);
        if (dd < bd) {
          bd = dd;
          best = static_cast<int>(c);
        }
      }
      changed = changed || assign[i] != best;
      assign[i] = best;
      dist_to_center[i] = bd;
      count[static_cast<std::size_t>(best)]++;
    }

    // Repair empty clusters with the farthest point, never stealing from a
    // singleton (that would just move the hole; n >= k guarantees a donor).
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[static_cast<std::size_t>(assign[i])] < 2) continue;
        if (far == n || dist_to_center[i] > dist_to_center[far]) far = i;
      }
      count[static_cast<std::size_t>(assign[far])]--;
      assign[far] = static_cast<int>(c);
      count[c] = 1;
      dist_to_center[far] = 0.0;
      changed = true;
    }

    Matrix sums(k, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assign[i]);
      const double* p = points.row(i);
      double* s = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < d; ++j) centers(c, j) = sums(c, j) / static_cast<double>(count[c]);

    if (!changed) break;
  }

  KmeansResult r;
  r.assignment = std::move(assign);
  for (std::size_t i = 0; i < n; ++i)
    r.inertia += sq_dist(points.row(i), centers.row(static_cast<std::size_t>(r.assignment[i])), d);
  return r;
}

// Contingency table and marginals of two equal-length labelings.
struct Contingency {
  std::map<std::pair<int, int>, std::size_t> joint;
  std::map<int, std::size_t> ma, mb;
  std::size_t n = 0;
};

Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) fail("partition comparison: length mismatch");
  if (a.empty()) fail("partition comparison: empty labelings");
  Contingency c;
  c.n = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.joint[{a[i], b[i]}]++;
    c.ma[a[i]]++;
    c.mb[b[i]]++;
  }
  return c;
}

}  // namespace

double confidence_interval(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  return 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(n));
}

KmeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts, std::size_t max_iters) {
  if (k < 1) fail("kmeans: k must be positive");
  if (points.rows() < k) fail("kmeans: fewer points than clusters");
  if (restarts < 1) fail("kmeans: need at least one restart");
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    KmeansResult cur = kmeans_once(points, k, derive_seed(seed, {r}), max_iters);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  Contingency c = contingency(a, b);
  const double n = static_cast<double>(c.n);
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (const auto& [label, count] : c.ma) {
    const double p = static_cast<double>(count) / n;
    ha -= p * std::log(p);
  }
  for (const auto& [label, count] : c.mb) {
    const double p = static_cast<double>(count) / n;
    hb -= p * std::log(p);
  }
  for (const auto& [pair, count] : c.joint) {
    const double pij = static_cast<double>(count) / n;
    const double pi = static_cast<double>(c.ma[pair.first]) / n;
    const double qj = static_cast<double>(c.mb[pair.second]) / n;
    mi += pij * std::log(pij / (pi * qj));
  }
  const double denom = 0.5 * (ha + hb);
  if (denom <= 0.0) return 1.0;  // both partitions trivial
  return std::max(0.0, mi) / denom;
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
  Contingency c = contingency(a, b);
  auto choose2 = [](std::size_t x) { return 0.5 * static_cast<double>(x) * (static_cast<double>(x) - 1.0); };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [pair, count] : c.joint) sum_ij += choose2(count);
  for (const auto& [label, count] : c.ma) sum_a += choose2(count);
  for (const auto& [label, count] : c.mb) sum_b += choose2(count);
  const double total = choose2(c.n);
  if (total == 0.0) return 1.0;  // a single point has no pairs to disagree on
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // e.g. both all-singletons or both trivial
  return (sum_ij - expected) / (max_index - expected);
}

ClusteringScores clustering_scores(const Matrix& embeddings, const std::vector<std::size_t>& nodes,
                                   const std::vector<int>& labels, std::size_t k,
                                   std::uint64_t seed) {
  if (nodes.size() != labels.size()) fail("clustering_scores: one label per node required");
  Matrix pts = gather_rows(embeddings, nodes);
  KmeansResult km = kmeans(pts, k, seed);
  ClusteringScores s;
  s.nmi = nmi(labels, km.assignment);
  s.ari = ari(labels, km.assignment);
  return s;
}

}  // namespace fsnc
