#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fsnc/episodes.hpp"
#include "fsnc/graph.hpp"
#include "fsnc/matrix.hpp"

namespace fsnc {

// Knobs for the train/validate/test loop shared by every method.
struct ProtocolConfig {
  EpisodeSpec episode;              // N-way / K-shot / M-query layout
  std::size_t validate_every = 10;  // epochs between validation passes
  std::size_t num_tasks = 100;      // evaluation episodes per dev/test pass
  std::size_t patience = 10;        // failed validations before stopping
  std::size_t max_epochs = 10000;
  std::size_t num_repeats = 5;
  std::size_t num_threads = 1;  // workers for episode evaluation
  std::uint64_t base_seed = 0;
};

// A method under evaluation. One instance handles one repeat: the protocol
// drives train_epoch in a loop, brackets the best validation score with
// snapshot/restore, and asks predict() for each evaluation episode.
//
// predict() must be safe to call concurrently when num_threads > 1; every
// source of randomness it needs is handed in through task_seed.
class MethodTrainer {
 public:
  virtual ~MethodTrainer() = default;

  // False for methods with no episodic training phase (e.g. a frozen encoder
  // with a per-episode probe); the protocol then skips straight to testing.
  virtual bool trainable() const = 0;

  // One training epoch (one meta-training episode for episodic methods).
  virtual void train_epoch(std::uint64_t epoch_seed) = 0;

  // Capture / bring back the best-scoring model state.
  virtual void snapshot() = 0;
  virtual void restore() = 0;

  // Local labels (< n_way) for the episode's query nodes.
  virtual std::vector<int> predict(const Episode& episode,
                                   std::uint64_t task_seed) = 0;

  // One embedding row per graph node, used for clustering diagnostics.
  virtual Matrix embeddings() = 0;
};

using TrainerFactory =
    std::function<std::unique_ptr<MethodTrainer>(std::uint64_t repeat_seed)>;

using EpisodePredictor =
    std::function<std::vector<int>(const Episode&, std::uint64_t task_seed)>;

// Mean accuracy over num_tasks episodes sampled from `classes`. Every task's
// episode and predictor seed are derived from block_seed and the task index
// alone, so the result is byte-identical for any worker count.
double evaluate_meta_tasks(const GraphBundle& graph,
                           const std::vector<int>& classes,
                           const EpisodeSpec& spec, std::uint64_t block_seed,
                           std::size_t num_tasks, std::size_t num_threads,
                           const EpisodePredictor& predict_fn);

struct RepeatResult {
  double accuracy = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double best_dev_accuracy = 0.0;
  std::size_t epochs_trained = 0;
};

struct RunResult {
  std::string method;
  std::string dataset;
  EpisodeSpec episode;
  std::uint64_t base_seed = 0;
  std::vector<RepeatResult> repeats;
  double mean_accuracy = 0.0;
  double ci95 = 0.0;
  double mean_nmi = 0.0;
  double mean_ari = 0.0;
};

// Full evaluation: for each repeat, train with early stopping on dev
// episodes, test on fresh episodes from the held-out classes, and cluster
// the held-out-class embeddings. Aggregates accuracy with a 95% interval.
RunResult run_protocol(const GraphBundle& graph, const LabelSplit& split,
                       const ProtocolConfig& cfg, const std::string& method,
                       const std::string& dataset,
                       const TrainerFactory& factory);

// Stable JSON rendering of a result (sorted keys, two-space indent).
std::string run_result_to_json(const RunResult& result);

}  // namespace fsnc
