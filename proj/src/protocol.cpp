#include "fsnc/protocol.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "fsnc/metrics.hpp"
#include "fsnc/rng.hpp"
#include "json.hpp"

namespace fsnc {

namespace {

double task_accuracy(const Episode& episode, const std::vector<int>& pred) {
  if (pred.size() != episode.query_labels.size())
    throw std::invalid_argument(
        "predictor returned " + std::to_string(pred.size()) +
        " labels for " + std::to_string(episode.query_labels.size()) +
        " query nodes");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 ||
        static_cast<std::size_t>(pred[i]) >= episode.class_ids.size())
      throw std::invalid_argument("predicted label " +
                                  std::to_string(pred[i]) +
                                  " is outside the episode's label range");
    if (pred[i] == episode.query_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace

double evaluate_meta_tasks(const GraphBundle& graph,
                           const std::vector<int>& classes,
                           const EpisodeSpec& spec, std::uint64_t block_seed,
                           std::size_t num_tasks, std::size_t num_threads,
                           const EpisodePredictor& predict_fn) {
  if (num_tasks == 0) throw std::invalid_argument("num_tasks must be positive");
  std::vector<double> per_task(num_tasks, 0.0);

  // Each task is fully determined by block_seed and its own index, so the
  // assignment of tasks to workers cannot change any number.
  auto run_task = [&](std::size_t i) {
    const std::uint64_t task_seed = derive_seed(block_seed, {seed_ns::kTask, i});
    const Episode episode =
        sample_episode(graph, classes, spec, derive_seed(task_seed, {0}));
    const std::vector<int> pred =
        predict_fn(episode, derive_seed(task_seed, {1}));
    per_task[i] = task_accuracy(episode, pred);
  };

  if (num_threads <= 1) {
    for (std::size_t i = 0; i < num_tasks; ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < num_tasks;
           i = next.fetch_add(1)) {
        try {
          run_task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(num_threads, num_tasks);
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  double sum = 0.0;
  for (double a : per_task) sum += a;
  return sum / static_cast<double>(num_tasks);
}

RunResult run_protocol(const GraphBundle& graph, const LabelSplit& split,
                       const ProtocolConfig& cfg, const std::string& method,
                       const std::string& dataset,
                       const TrainerFactory& factory) {
  if (cfg.validate_every == 0)
    throw std::invalid_argument("validate_every must be positive");
  if (cfg.patience == 0) throw std::invalid_argument("patience must be positive");
  if (cfg.num_repeats == 0)
    throw std::invalid_argument("num_repeats must be positive");

  // Nodes whose classes are held out for testing, used both for clustering
  // diagnostics and (via sample_episode) for test episodes.
  const std::unordered_set<int> test_set(split.test_classes.begin(),
                                         split.test_classes.end());
  std::vector<std::size_t> cluster_nodes;
  std::vector<int> cluster_labels;
  for (std::size_t v = 0; v < graph.labels.size(); ++v) {
    if (test_set.count(graph.labels[v])) {
      cluster_nodes.push_back(v);
      cluster_labels.push_back(graph.labels[v]);
    }
  }

  RunResult result;
  result.method = method;
  result.dataset = dataset;
  result.episode = cfg.episode;
  result.base_seed = cfg.base_seed;

  for (std::size_t r = 0; r < cfg.num_repeats; ++r) {
    const std::uint64_t repeat_seed =
        derive_seed(cfg.base_seed, {seed_ns::kRepeat, r});
    std::unique_ptr<MethodTrainer> trainer = factory(repeat_seed);
    if (!trainer) throw std::invalid_argument("trainer factory returned null");

    RepeatResult repeat;
    auto predict = [&](const Episode& episode, std::uint64_t task_seed) {
      return trainer->predict(episode, task_seed);
    };

    if (trainer->trainable() && cfg.max_epochs > 0) {
      const std::uint64_t dev_block =
          derive_seed(repeat_seed, {seed_ns::kDevTasks});
      std::size_t failed = 0;  // consecutive validations without improvement
      double best = 0.0;
      bool snapshotted = false;
      for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        trainer->train_epoch(derive_seed(repeat_seed, {seed_ns::kEpoch, epoch}));
        repeat.epochs_trained = epoch;
        if (epoch % cfg.validate_every != 0) continue;
        // The dev block seed is fixed per repeat, so every validation pass
        // scores the same episodes and numbers stay comparable over time.
        const double score =
            evaluate_meta_tasks(graph, split.dev_classes, cfg.episode,
                                dev_block, cfg.num_tasks, cfg.num_threads,
                                predict);
        if (score > best) {
          best = score;
          trainer->snapshot();
          snapshotted = true;
          failed = 0;
        } else {
          ++failed;
        }
        if (failed >= cfg.patience) break;
      }
      repeat.best_dev_accuracy = best;
      if (snapshotted) trainer->restore();
    }

    const std::uint64_t test_block =
        derive_seed(repeat_seed, {seed_ns::kTestTasks});
    repeat.accuracy =
        evaluate_meta_tasks(graph, split.test_classes, cfg.episode, test_block,
                            cfg.num_tasks, cfg.num_threads, predict);

    const ClusteringScores scores = clustering_scores(
        trainer->embeddings(), cluster_nodes, cluster_labels,
        split.test_classes.size(), derive_seed(repeat_seed, {seed_ns::kClustering}));
    repeat.nmi = scores.nmi;
    repeat.ari = scores.ari;

    result.repeats.push_back(repeat);
  }

  std::vector<double> accs;
  for (const RepeatResult& rep : result.repeats) {
    accs.push_back(rep.accuracy);
    result.mean_nmi += rep.nmi;
    result.mean_ari += rep.ari;
  }
  const double n = static_cast<double>(result.repeats.size());
  result.mean_accuracy = 0.0;
  for (double a : accs) result.mean_accuracy += a;
  result.mean_accuracy /= n;
  result.mean_nmi /= n;
  result.mean_ari /= n;
  result.ci95 = confidence_interval(accs);
  return result;
}

std::string run_result_to_json(const RunResult& result) {
  nlohmann::json j;
  j["method"] = result.method;
  j["dataset"] = result.dataset;
  j["n_way"] = result.episode.n_way;
  j["k_shot"] = result.episode.k_shot;
  j["m_query"] = result.episode.m_query;
  j["base_seed"] = result.base_seed;
  j["num_repeats"] = result.repeats.size();
  j["mean_accuracy"] = result.mean_accuracy;
  j["ci95"] = result.ci95;
  j["mean_nmi"] = result.mean_nmi;
  j["mean_ari"] = result.mean_ari;
  j["repeats"] = nlohmann::json::array();
  for (const RepeatResult& rep : result.repeats) {
    nlohmann::json jr;
    jr["accuracy"] = rep.accuracy;
    jr["nmi"] = rep.nmi;
    jr["ari"] = rep.ari;
    jr["best_dev_accuracy"] = rep.best_dev_accuracy;
    jr["epochs_trained"] = rep.epochs_trained;
    j["repeats"].push_back(jr);
  }
  return j.dump(2) + "\n";
}

}  // namespace fsnc
