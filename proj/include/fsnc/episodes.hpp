#pragma once

#include "fsnc/graph.hpp"
#include "fsnc/matrix.hpp"
#include "fsnc/nn.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace fsnc {

// N-way / K-shot / M-query episode shape.
struct EpisodeSpec {
  std::size_t n_way = 2;
  std::size_t k_shot = 5;
  std::size_t m_query = 10;
};

// One few-shot task.  Node lists are grouped by local class (class 0's K
// support nodes first, then class 1's, ...); support and query never overlap.
struct Episode {
  std::vector<std::size_t> support_nodes;
  std::vector<int> support_labels;  // local ids 0..n_way-1
  std::vector<std::size_t> query_nodes;
  std::vector<int> query_labels;
  std::vector<int> class_ids;  // local id -> global class id, in draw order
};

// Draws N distinct classes from `pool`, then K+M distinct nodes per class.
// Fails if the pool is too small or any drawn class has fewer than K+M nodes.
Episode sample_episode(const GraphBundle& g, const std::vector<int>& pool,
                       const EpisodeSpec& spec, std::uint64_t seed);

// Nearest-prototype episode on given embeddings: prototypes are support class
// means, query logits are negative squared distances, loss is mean query CE.
// dz is the exact gradient w.r.t. the full embedding matrix (nonzero only on
// the episode's rows).
struct ProtoResult {
  double loss = 0.0;
  Matrix dz;
  std::vector<int> predictions;  // query local labels; ties -> lowest id
};

ProtoResult protonet_episode(const Matrix& z, const Episode& ep);

// Prediction-only variant for frozen-embedding evaluation.
std::vector<int> protonet_predict(const Matrix& z, const Episode& ep);

// Plain full-batch gradient descent used for per-episode adaptation.  The
// callback returns the gradient list for the current parameters; the returned
// vector holds the adapted parameters after `steps` updates.
std::vector<Matrix> gd_adapt(
    std::vector<Matrix> params,
    const std::function<std::vector<Matrix>(const std::vector<Matrix>&)>& grad_fn,
    std::size_t steps, double lr);

struct MamlConfig {
  std::size_t inner_steps = 20;
  double inner_lr = 0.05;
  double dropout = 0.5;  // applied on the outer query pass only
};

// Support-set adaptation of encoder + a linear head (out_dim x n_way) by
// inner_steps of gradient descent on support cross-entropy.  The encoder runs
// in eval mode so adaptation is deterministic.
struct AdaptedModel {
  EncoderParams enc;
  Matrix head;
  double initial_support_loss = 0.0;
  double final_support_loss = 0.0;
};

AdaptedModel maml_inner_adapt(const EncoderParams& enc, const Matrix& head,
                              const std::shared_ptr<const NormalizedAdjacency>& adj,
                              const std::shared_ptr<const Matrix>& x, const Episode& ep,
                              std::size_t steps, double lr);

// One first-order meta step: adapt a fresh episode-seeded head (plus encoder
// copy) on the support set, then return the query-loss gradients evaluated at
// the adapted parameters, taken w.r.t. the encoder weights.  The head is
// episode-local and discarded.
struct MamlEpisodeResult {
  double query_loss = 0.0;
  EncoderGrads enc_grads;
  std::vector<int> predictions;
};

MamlEpisodeResult maml_outer_step(const EncoderParams& enc,
                                  const std::shared_ptr<const NormalizedAdjacency>& adj,
                                  const std::shared_ptr<const Matrix>& x, const Episode& ep,
                                  const MamlConfig& cfg, std::uint64_t seed);

// Evaluation path: adapt on support (eval mode throughout) and label queries.
std::vector<int> maml_predict(const EncoderParams& enc,
                              const std::shared_ptr<const NormalizedAdjacency>& adj,
                              const std::shared_ptr<const Matrix>& x, const Episode& ep,
                              const MamlConfig& cfg, std::uint64_t seed);

}  // namespace fsnc
