#pragma once

#include "fsnc/matrix.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fsnc {

// An undirected attributed graph with one integer class label per node.
// Edges are stored canonically: (lo, hi) with lo < hi, sorted, no duplicates,
// no self-loops; each undirected edge appears exactly once.
struct GraphBundle {
  Matrix features;                                        // n x d
  std::vector<int> labels;                                // size n, dense ids 0..C-1
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t num_nodes() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  int num_classes() const;
  // Node ids per class, ascending within each class.
  std::vector<std::vector<std::size_t>> nodes_by_class() const;
};

// Checks the canonical-edge and dense-label invariants; throws
// std::invalid_argument describing the first violation.
void validate_bundle(const GraphBundle& g);

// Disjoint class pools for episode construction.  Always kept sorted.
struct LabelSplit {
  std::vector<int> train_classes;
  std::vector<int> dev_classes;
  std::vector<int> test_classes;
};

// Validates a split assignment against the bundle's label set: the three sets
// must be disjoint, each non-empty, and their union must cover every class
// that appears in the graph.  Returns the assignment with each pool sorted.
LabelSplit split_label_space(const GraphBundle& g, const LabelSplit& assignment);

// Symmetrically normalized adjacency with self-loops,
//   A_hat = D~^{-1/2} (A + I) D~^{-1/2},  D~ = D + I,
// stored CSR.  Row i always includes the diagonal entry 1/(deg_i + 1).
struct NormalizedAdjacency {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;  // n + 1
  std::vector<std::size_t> col;      // ascending within each row
  std::vector<double> val;
};

NormalizedAdjacency normalize_adjacency(const GraphBundle& g);

// Dense product A_hat * X.
Matrix spmm(const NormalizedAdjacency& a, const Matrix& x);

// Stochastic block model with Gaussian class-conditional features.  Class
// means sit on distinct coordinate axes, scaled so every pair of means is
// exactly `class_mean_separation * noise_std` apart.
struct SbmSpec {
  std::size_t num_classes = 4;
  std::size_t nodes_per_class = 50;
  double p_in = 0.2;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double class_mean_separation = 3.0;  // in units of noise_std
  double noise_std = 1.0;
};

GraphBundle generate_sbm(const SbmSpec& spec, std::uint64_t seed);

// --- bundle directory format -------------------------------------------------
//
//   edges.csv      header "src,dst", one undirected edge per row (either
//                  orientation, no duplicates in both orientations, no loops)
//   features.csv   n rows of comma-separated reals (no header), or
//   features.bin   "FSNB" + u32 version + u32 n + u32 d + n*d float32 LE
//   labels.csv     one integer per row
//   splits.json    {"train": [...], "dev": [...], "test": [...]}  (class ids)

GraphBundle load_bundle(const std::string& dir);
// Writes edges/labels/splits and either features.bin (default) or
// features.csv.  All writes are atomic.
void save_bundle(const std::string& dir, const GraphBundle& g, const LabelSplit& split,
                 bool binary_features = true);

LabelSplit load_split_assignment(const std::string& dir);

// FSNB float32 matrix container (features, exported embeddings).
void write_fsnb(const std::string& path, const Matrix& m);
Matrix read_fsnb(const std::string& path);

}  // namespace fsnc
