#pragma once

#include "fsnc/matrix.hpp"

#include <cstddef>
#include <vector>

namespace fsnc {

// Multinomial logistic regression on frozen embeddings, trained per episode
// on the support set by full-batch gradient descent from zero init.
struct ProbeConfig {
  double l2 = 1e-2;          // ridge strength on the weights (bias is free)
  double lr = 0.5;
  std::size_t max_iters = 1000;
  double tol = 1e-6;         // stop when every gradient entry is below this
  bool standardize = true;   // per-dim standardization fit on the support set
};

struct LinearProbe {
  Matrix w;           // d x n_classes
  Matrix b;           // 1 x n_classes
  std::size_t iters = 0;  // gradient steps actually taken
};

// Loss and exact gradients of  mean-CE(x W + b, y) + (l2/2) ||W||^2.
struct ProbeObjective {
  double loss = 0.0;
  Matrix dw;
  Matrix db;
};

ProbeObjective probe_objective(const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                               const Matrix& b, double l2);

// Fits on embeddings.row(nodes[i]) with local labels[i] in [0, n_classes).
// Standardization statistics come from the support rows only and are folded
// into the returned weights, so prediction needs no extra state.
LinearProbe fit_probe(const Matrix& embeddings, const std::vector<std::size_t>& nodes,
                      const std::vector<int>& labels, std::size_t n_classes,
                      const ProbeConfig& cfg);

// Row-wise argmax of x W + b over the listed nodes; ties -> lowest label.
std::vector<int> probe_predict(const LinearProbe& probe, const Matrix& embeddings,
                               const std::vector<std::size_t>& nodes);

}  // namespace fsnc
