#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fsnc/episodes.hpp"
#include "fsnc/pretrain.hpp"
#include "fsnc/probe.hpp"
#include "fsnc/protocol.hpp"

namespace fsnc {

// Shared knobs for the episodic (meta-learned) methods.
struct MetaConfig {
  EpisodeSpec episode;  // meta-training episode shape
  double dropout = 0.5;
  AdamHyper adam;   // outer-loop optimizer
  MamlConfig maml;  // inner-loop settings (meta-maml only)
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 16;
};

// Everything needed to run one method through the evaluation protocol.
struct MethodConfig {
  std::string name = "tlp-infonce";
  PretrainConfig pretrain;  // probe-style methods
  ProbeConfig probe;
  MetaConfig meta;  // episodic methods
};

// All supported method names: episodic baselines plus frozen-encoder probing
// with each pretraining objective.
const std::vector<std::string>& known_methods();

// True for methods that freeze a pretrained encoder and fit a per-episode
// probe (no episodic training phase).
bool is_probe_method(const std::string& name);

// Pretraining objective behind a probe-style method; throws for episodic ones.
PretrainObjective objective_for_method(const std::string& name);

// Nearest-prototype episodic learner over a trainable encoder.
std::unique_ptr<MethodTrainer> make_protonet_trainer(const GraphBundle& g,
                                                     std::vector<int> train_classes,
                                                     const MetaConfig& cfg,
                                                     std::uint64_t repeat_seed);

// First-order gradient-based adaptation learner (support-set fine-tuning of
// encoder + episode-local head, meta-updated by query loss).
std::unique_ptr<MethodTrainer> make_maml_trainer(const GraphBundle& g,
                                                 std::vector<int> train_classes,
                                                 const MetaConfig& cfg,
                                                 std::uint64_t repeat_seed);

// Per-episode logistic probe on frozen, precomputed embeddings (no training
// loop; used when an already-pretrained encoder is supplied).
std::unique_ptr<MethodTrainer> make_probe_trainer(std::shared_ptr<const Matrix> embeddings,
                                                  const ProbeConfig& cfg);

// Frozen-encoder probing whose pretraining runs under the evaluation
// protocol: each train_epoch advances the pretraining stream one epoch, and
// every prediction freezes the current encoder, embeds all nodes, and fits a
// per-episode probe on those rows.  Driving epoch seeds
// derive_seed(s, {kEpoch, 1..E}) into a trainer built with repeat seed s
// reproduces standalone pretraining with seed s exactly.
std::unique_ptr<MethodTrainer> make_tlp_trainer(const GraphBundle& g,
                                                const LabelSplit& split,
                                                const PretrainConfig& cfg,
                                                const ProbeConfig& probe,
                                                std::uint64_t repeat_seed);

// A ready-to-run factory for the protocol.  Every method builds fresh
// per-repeat state inside the factory (probe-style methods pretrain their
// encoder under the protocol's epoch loop); `preloaded` instead freezes the
// given encoder outright and shares its embeddings across repeats.  The
// graph must outlive the returned factory.
struct MethodSetup {
  TrainerFactory factory;
  std::shared_ptr<const EncoderParams> pretrained;  // set only when preloaded
};

MethodSetup prepare_method(const GraphBundle& g, const LabelSplit& split,
                           const MethodConfig& cfg,
                           const EncoderParams* preloaded = nullptr);

}  // namespace fsnc
