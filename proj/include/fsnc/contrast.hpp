#pragma once

#include "fsnc/graph.hpp"
#include "fsnc/matrix.hpp"
#include "fsnc/nn.hpp"

#include <cstdint>
#include <vector>

namespace fsnc {

// Stochastic graph views: each edge is dropped independently, and feature
// columns (whole dimensions, shared across nodes) are zeroed independently.
struct AugmentSpec {
  double edge_drop = 0.3;
  double feature_mask = 0.3;
};

GraphBundle augment_view(const GraphBundle& g, const AugmentSpec& spec, std::uint64_t seed);

// Losses return the scalar plus exact gradients w.r.t. the embedding inputs.
// Cosine-based losses guard zero rows with a tiny norm floor.

struct PairLossResult {
  double value = 0.0;
  Matrix du;
  Matrix dv;
};

// Two-view InfoNCE with cosine similarity at temperature tau.  For anchor u_i
// the positive is v_i; every other node in both views is a negative:
//   l(u_i, v_i) = -log exp(s(u_i,v_i)/tau) /
//                 (sum_j exp(s(u_i,v_j)/tau) + sum_{j!=i} exp(s(u_i,u_j)/tau))
// and the loss is the mean of l(u_i,v_i) and l(v_i,u_i) over nodes.
PairLossResult loss_info_nce(const Matrix& u, const Matrix& v, double temperature);

// Discriminator-style objective on raw dot products: positives are aligned
// pairs (u_i, v_i), negatives pair u_i with v_{pi(i)} for a seeded derangement
// pi (single-cycle shuffle, so pi(i) != i always):
//   L = -mean log sigmoid(u_i . v_i) - mean log(1 - sigmoid(u_i . v_{pi(i)}))
// computed via softplus so saturated scores stay finite.
PairLossResult loss_jsd(const Matrix& u, const Matrix& v, std::uint64_t seed);

struct SupconResult {
  double value = 0.0;
  Matrix dz;
};

// Supervised contrastive loss over one embedding batch with labels: anchors
// average -log softmax mass on their same-label rows; anchors with no other
// row of their label are skipped.  Throws if no anchor has a positive.
SupconResult loss_supcon(const Matrix& z, const std::vector<int>& labels, double temperature);

struct BootstrapResult {
  double value = 0.0;
  Matrix dp;
};

// Regression of online predictions onto target projections,
//   L = mean_i (2 - 2 cos(p_i, t_i)),
// with gradient only into p (the target branch receives none).
BootstrapResult loss_bootstrap(const Matrix& p, const Matrix& t);

// Exponential-moving-average copy of the online parameters.
struct EmaTarget {
  EncoderParams params;
  double decay = 0.99;
};

void ema_update(EmaTarget& target, const EncoderParams& online);

// A scalar loss value with gradients over an arbitrary parameter list (used
// to combine losses computed over the same parameters).
struct LossWithGrads {
  double value = 0.0;
  std::vector<Matrix> grads;
};

// lambda * self + (1 - lambda) * sup, gradients combined elementwise.
LossWithGrads loss_joint(const LossWithGrads& self_loss, const LossWithGrads& sup_loss,
                         double lambda);

}  // namespace fsnc
