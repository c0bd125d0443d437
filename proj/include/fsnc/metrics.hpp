#pragma once

#include "fsnc/matrix.hpp"

#include <cstdint>
#include <vector>

namespace fsnc {

// Normal-approximation 95% half-width: 1.96 * sample_std / sqrt(n), with the
// Bessel-corrected standard deviation.  Fewer than two values -> 0.
double confidence_interval(const std::vector<double>& values);

// Lloyd's algorithm with k-means++ seeding, best inertia over `restarts`
// independent runs.  Empty clusters are repaired by moving in the point
// farthest from its current center.  Ties in assignment go to the lowest
// cluster id, so results are fully deterministic per seed.
struct KmeansResult {
  std::vector<int> assignment;
  double inertia = 0.0;
};

KmeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = 10, std::size_t max_iters = 300);

// Normalized mutual information with arithmetic-mean normalization; both
// partitions being single clusters scores 1 (nothing to disagree about).
double nmi(const std::vector<int>& a, const std::vector<int>& b);

// Adjusted Rand index via the contingency pair-count formula; degenerate
// normalization (identical trivial pair structure) scores 1.
double ari(const std::vector<int>& a, const std::vector<int>& b);

// k-means on the listed embedding rows, scored against the given labels
// (labels[i] belongs to nodes[i]).
struct ClusteringScores {
  double nmi = 0.0;
  double ari = 0.0;
};

ClusteringScores clustering_scores(const Matrix& embeddings,
                                   const std::vector<std::size_t>& nodes,
                                   const std::vector<int>& labels, std::size_t k,
                                   std::uint64_t seed);

}  // namespace fsnc
