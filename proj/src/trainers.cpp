#include "fsnc/trainers.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

#include "fsnc/rng.hpp"

namespace fsnc {

namespace {

// Common state for the episodic methods: a trainable encoder over a fixed
// graph, snapshots for early stopping, and parameter-only evaluation paths
// (predict never mutates, so the protocol may call it from several threads).
class EpisodicTrainer : public MethodTrainer {
 public:
  EpisodicTrainer(const GraphBundle& g, std::vector<int> train_classes,
                  const MetaConfig& cfg, std::uint64_t repeat_seed)
      : graph_(&g),
        pool_(std::move(train_classes)),
        cfg_(cfg),
        adj_(std::make_shared<const NormalizedAdjacency>(normalize_adjacency(g))),
        x_(std::make_shared<const Matrix>(g.features)),
        params_(init_encoder(
            {g.features.cols(), cfg.hidden_dim, cfg.output_dim, false},
            repeat_seed)),
        best_(params_) {}

  bool trainable() const override { return true; }

  void train_epoch(std::uint64_t epoch_seed) override {
    const Episode ep =
        sample_episode(*graph_, pool_, cfg_.episode,
                       derive_seed(epoch_seed, {seed_ns::kTrainEpisode}));
    train_on(ep, epoch_seed);
  }

  void snapshot() override { best_ = params_; }
  void restore() override { params_ = best_; }

  Matrix embeddings() override {
    return encoder_forward(params_, adj_, x_, ForwardMode::kEval, 0.0, 0, nullptr);
  }

 protected:
  virtual void train_on(const Episode& ep, std::uint64_t epoch_seed) = 0;

  const GraphBundle* graph_;
  std::vector<int> pool_;
  MetaConfig cfg_;
  std::shared_ptr<const NormalizedAdjacency> adj_;
  std::shared_ptr<const Matrix> x_;
  EncoderParams params_;
  EncoderParams best_;
  AdamState adam_;
};

class ProtonetTrainer final : public EpisodicTrainer {
 public:
  using EpisodicTrainer::EpisodicTrainer;

  std::vector<int> predict(const Episode& ep, std::uint64_t) override {
    const Matrix z =
        encoder_forward(params_, adj_, x_, ForwardMode::kEval, 0.0, 0, nullptr);
    return protonet_predict(z, ep);
  }

 private:
  void train_on(const Episode& ep, std::uint64_t epoch_seed) override {
    ForwardTape tape;
    const Matrix z = encoder_forward(params_, adj_, x_, ForwardMode::kTrain,
                                     cfg_.dropout,
                                     derive_seed(epoch_seed, {seed_ns::kDropout}),
                                     &tape);
    const ProtoResult res = protonet_episode(z, ep);
    const EncoderGrads grads = encoder_backward(params_, tape, res.dz);
    adam_step({&params_.w1, &params_.w2}, {&grads.dw1, &grads.dw2}, adam_,
              cfg_.adam);
  }
};

class MamlTrainer final : public EpisodicTrainer {
 public:
  using EpisodicTrainer::EpisodicTrainer;

  std::vector<int> predict(const Episode& ep, std::uint64_t task_seed) override {
    return maml_predict(params_, adj_, x_, ep, cfg_.maml, task_seed);
  }

 private:
  void train_on(const Episode& ep, std::uint64_t epoch_seed) override {
    const MamlEpisodeResult res =
        maml_outer_step(params_, adj_, x_, ep, cfg_.maml, epoch_seed);
    adam_step({&params_.w1, &params_.w2},
              {&res.enc_grads.dw1, &res.enc_grads.dw2}, adam_, cfg_.adam);
  }
};

// Frozen-encoder probing with its pretraining driven from outside: the
// protocol's epoch loop advances the pretraining stream, and every
// evaluation freezes the current encoder, embeds all nodes once, and fits a
// per-episode probe on those rows.
class TlpTrainer final : public MethodTrainer {
 public:
  TlpTrainer(const GraphBundle& g, const LabelSplit& split,
             const PretrainConfig& cfg, const ProbeConfig& probe,
             std::uint64_t repeat_seed)
      : graph_(&g), probe_(probe), state_(g, split, cfg, repeat_seed),
        best_(state_.params()) {}

  bool trainable() const override { return true; }

  void train_epoch(std::uint64_t epoch_seed) override {
    state_.step(epoch_seed);
    stale_ = true;
  }

  void snapshot() override { best_ = state_.params(); }
  void restore() override {
    state_.set_params(best_);
    stale_ = true;
  }

  std::vector<int> predict(const Episode& ep, std::uint64_t) override {
    const std::shared_ptr<const Matrix> z = frozen();
    const LinearProbe probe = fit_probe(*z, ep.support_nodes, ep.support_labels,
                                        ep.class_ids.size(), probe_);
    return probe_predict(probe, *z, ep.query_nodes);
  }

  Matrix embeddings() override { return *frozen(); }

 private:
  // Embeddings of the current encoder, recomputed once per parameter change.
  // predict() runs concurrently under the evaluation thread pool (always
  // between training steps, never during one), so the refresh is locked and
  // the computed matrix shared read-only.
  std::shared_ptr<const Matrix> frozen() {
    std::lock_guard<std::mutex> lock(mu_);
    if (stale_ || !z_) {
      z_ = std::make_shared<const Matrix>(embed_all(state_.params(), *graph_));
      stale_ = false;
    }
    return z_;
  }

  const GraphBundle* graph_;
  ProbeConfig probe_;
  PretrainState state_;
  EncoderParams best_;
  std::mutex mu_;
  bool stale_ = true;
  std::shared_ptr<const Matrix> z_;
};

class ProbeTrainer final : public MethodTrainer {
 public:
  ProbeTrainer(std::shared_ptr<const Matrix> embeddings, const ProbeConfig& cfg)
      : z_(std::move(embeddings)), cfg_(cfg) {
    if (!z_ || z_->empty())
      throw std::invalid_argument("probe trainer needs non-empty embeddings");
  }

  bool trainable() const override { return false; }
  void train_epoch(std::uint64_t) override {
    throw std::logic_error("probe methods have no training loop");
  }
  void snapshot() override {
    throw std::logic_error("probe methods have no training loop");
  }
  void restore() override {
    throw std::logic_error("probe methods have no training loop");
  }

  std::vector<int> predict(const Episode& ep, std::uint64_t) override {
    const LinearProbe probe = fit_probe(*z_, ep.support_nodes, ep.support_labels,
                                        ep.class_ids.size(), cfg_);
    return probe_predict(probe, *z_, ep.query_nodes);
  }

  Matrix embeddings() override { return *z_; }

 private:
  std::shared_ptr<const Matrix> z_;
  ProbeConfig cfg_;
};

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {
      "meta-protonet", "meta-maml",   "ignn",      "tlp-infonce",
      "tlp-jsd",       "tlp-supcon",  "tlp-joint", "tlp-bootstrap"};
  return methods;
}

bool is_probe_method(const std::string& name) {
  return name == "ignn" || name.rfind("tlp-", 0) == 0;
}

PretrainObjective objective_for_method(const std::string& name) {
  if (name == "ignn") return PretrainObjective::kCe;
  if (name == "tlp-infonce") return PretrainObjective::kInfoNce;
  if (name == "tlp-jsd") return PretrainObjective::kJsd;
  if (name == "tlp-supcon") return PretrainObjective::kSupCon;
  if (name == "tlp-joint") return PretrainObjective::kJoint;
  if (name == "tlp-bootstrap") return PretrainObjective::kBootstrap;
  throw std::invalid_argument("method '" + name +
                              "' does not pretrain an encoder");
}

std::unique_ptr<MethodTrainer> make_protonet_trainer(const GraphBundle& g,
                                                     std::vector<int> train_classes,
                                                     const MetaConfig& cfg,
                                                     std::uint64_t repeat_seed) {
  return std::make_unique<ProtonetTrainer>(g, std::move(train_classes), cfg,
                                           repeat_seed);
}

std::unique_ptr<MethodTrainer> make_maml_trainer(const GraphBundle& g,
                                                 std::vector<int> train_classes,
                                                 const MetaConfig& cfg,
                                                 std::uint64_t repeat_seed) {
  return std::make_unique<MamlTrainer>(g, std::move(train_classes), cfg,
                                       repeat_seed);
}

std::unique_ptr<MethodTrainer> make_probe_trainer(std::shared_ptr<const Matrix> embeddings,
                                                  const ProbeConfig& cfg) {
  return std::make_unique<ProbeTrainer>(std::move(embeddings), cfg);
}

std::unique_ptr<MethodTrainer> make_tlp_trainer(const GraphBundle& g,
                                                const LabelSplit& split,
                                                const PretrainConfig& cfg,
                                                const ProbeConfig& probe,
                                                std::uint64_t repeat_seed) {
  return std::make_unique<TlpTrainer>(g, split, cfg, probe, repeat_seed);
}

MethodSetup prepare_method(const GraphBundle& g, const LabelSplit& split,
                           const MethodConfig& cfg,
                           const EncoderParams* preloaded) {
  const auto& names = known_methods();
  if (std::find(names.begin(), names.end(), cfg.name) == names.end()) {
    std::string all;
    for (const std::string& n : names) all += (all.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown method '" + cfg.name + "' (expected " +
                                all + ")");
  }

  MethodSetup setup;
  if (preloaded) {
    if (!is_probe_method(cfg.name))
      throw std::invalid_argument("a pretrained encoder only applies to probe "
                                  "methods, not " + cfg.name);
    const auto enc = std::make_shared<const EncoderParams>(*preloaded);
    setup.pretrained = enc;
    const auto z = std::make_shared<const Matrix>(embed_all(*enc, g));
    const ProbeConfig probe = cfg.probe;
    setup.factory = [z, probe](std::uint64_t) {
      return make_probe_trainer(z, probe);
    };
    return setup;
  }

  if (is_probe_method(cfg.name)) {
    PretrainConfig pcfg = cfg.pretrain;
    pcfg.objective = objective_for_method(cfg.name);
    const GraphBundle* graph = &g;
    const LabelSplit split_copy = split;
    const ProbeConfig probe = cfg.probe;
    setup.factory = [graph, split_copy, pcfg, probe](std::uint64_t repeat_seed) {
      return make_tlp_trainer(*graph, split_copy, pcfg, probe, repeat_seed);
    };
    return setup;
  }

  const bool is_maml = cfg.name == "meta-maml";
  const MetaConfig meta = cfg.meta;
  const GraphBundle* graph = &g;
  std::vector<int> pool = split.train_classes;
  setup.factory = [graph, pool, meta, is_maml](std::uint64_t repeat_seed) {
    return is_maml ? make_maml_trainer(*graph, pool, meta, repeat_seed)
                   : make_protonet_trainer(*graph, pool, meta, repeat_seed);
  };
  return setup;
}

}  // namespace fsnc
