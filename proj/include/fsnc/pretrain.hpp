#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsnc/contrast.hpp"
#include "fsnc/graph.hpp"
#include "fsnc/nn.hpp"

namespace fsnc {

// Objectives for whole-graph encoder pretraining.  "ce" is plain supervised
// node classification through a temporary linear head; the rest are
// contrastive and train through a projection head on two stochastic views.
enum class PretrainObjective { kCe, kInfoNce, kJsd, kSupCon, kJoint, kBootstrap };

PretrainObjective parse_objective(const std::string& name);
std::string objective_name(PretrainObjective objective);

struct PretrainConfig {
  PretrainObjective objective = PretrainObjective::kInfoNce;
  std::size_t epochs = 200;  // one full-graph gradient step per epoch
  AdamHyper adam;
  double dropout = 0.5;
  double temperature = 0.5;  // infonce and supcon
  double lambda = 0.5;       // joint mix: lambda*self + (1-lambda)*supervised
  double ema_decay = 0.99;   // bootstrap target network
  AugmentSpec augment;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 16;
  bool ce_uses_dev = true;  // ce supervision covers train+dev classes
};

struct PretrainResult {
  EncoderParams params;
  std::vector<double> epoch_losses;
};

// One pretraining stream whose epochs are driven from outside, so the
// evaluation protocol can validate and early-stop it like any other trainer.
// Holds the optimizer state plus the objective's auxiliaries: the supervised
// classification head, the bootstrap online predictor (both discarded with
// the stream), and the bootstrap moving-average target.  Supervised signal,
// where used, is label-split aware: ce sees train classes (plus dev classes
// unless disabled); the supervised contrastive term sees train classes only.
class PretrainState {
 public:
  PretrainState(const GraphBundle& g, const LabelSplit& split,
                const PretrainConfig& cfg, std::uint64_t seed);

  // One full-graph gradient step; returns the epoch's loss value.
  double step(std::uint64_t epoch_seed);

  const EncoderParams& params() const { return params_; }
  void set_params(const EncoderParams& p) { params_ = p; }
  const PretrainConfig& config() const { return cfg_; }

 private:
  double step_ce(std::uint64_t epoch_seed);
  double step_contrastive(std::uint64_t epoch_seed);

  const GraphBundle* g_;
  PretrainConfig cfg_;
  EncoderParams params_;
  AdamState adam_;
  std::shared_ptr<const NormalizedAdjacency> adj_;  // ce only (no augmentation)
  std::shared_ptr<const Matrix> x_;
  std::vector<std::size_t> labeled_nodes_;  // ce rows or supervised anchors
  std::vector<int> mapped_labels_;          // ce targets, contiguous ids
  Matrix head_;                             // ce classifier, discarded
  Matrix predictor_;                        // bootstrap online predictor, discarded
  std::optional<EmaTarget> target_;         // bootstrap only
};

// Trains an encoder on the whole graph for a fixed number of epochs (see
// PretrainState for the split-awareness rules).  The ce head and bootstrap
// predictor are discarded; contrastive projection heads ship with the params.
PretrainResult pretrain_encoder(const GraphBundle& g, const LabelSplit& split,
                                const PretrainConfig& cfg, std::uint64_t seed);

// Deterministic eval-mode embeddings for every node, before any projection.
Matrix embed_all(const EncoderParams& params, const GraphBundle& g);

}  // namespace fsnc
