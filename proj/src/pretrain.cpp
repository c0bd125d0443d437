#include "fsnc/pretrain.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <unordered_set>

#include "fsnc/rng.hpp"

namespace fsnc {

namespace {

std::vector<std::size_t> nodes_with_classes(const GraphBundle& g,
                                            const std::vector<int>& classes) {
  const std::unordered_set<int> keep(classes.begin(), classes.end());
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.labels.size(); ++v)
    if (keep.count(g.labels[v])) out.push_back(v);
  return out;
}

// One augmented view, forwarded in train mode, with everything the backward
// pass needs kept alive.
struct ViewPass {
  std::shared_ptr<const NormalizedAdjacency> adj;
  std::shared_ptr<const Matrix> x;
  ForwardTape tape;
  ProjectionTape proj_tape;
  Matrix z;  // encoder output
  Matrix p;  // projection output
};

ViewPass forward_view(const EncoderParams& params, const GraphBundle& g,
                      const AugmentSpec& augment, double dropout,
                      std::uint64_t view_seed, std::uint64_t dropout_seed) {
  GraphBundle view = augment_view(g, augment, view_seed);
  ViewPass pass;
  pass.adj = std::make_shared<const NormalizedAdjacency>(normalize_adjacency(view));
  pass.x = std::make_shared<const Matrix>(std::move(view.features));
  pass.z = encoder_forward(params, pass.adj, pass.x, ForwardMode::kTrain, dropout,
                           dropout_seed, &pass.tape);
  pass.p = projection_forward(params, pass.z, &pass.proj_tape);
  return pass;
}

// Eval-mode projection of an augmented view under fixed (target) parameters.
Matrix forward_view_frozen(const EncoderParams& params, const GraphBundle& g,
                           const AugmentSpec& augment, std::uint64_t view_seed) {
  GraphBundle view = augment_view(g, augment, view_seed);
  const auto adj = std::make_shared<const NormalizedAdjacency>(normalize_adjacency(view));
  const auto x = std::make_shared<const Matrix>(std::move(view.features));
  const Matrix z =
      encoder_forward(params, adj, x, ForwardMode::kEval, 0.0, 0, nullptr);
  return projection_forward(params, z, nullptr);
}

// Supervised contrastive batch: the labeled rows of both views stacked, so
// every anchor has at least its own other-view copy as a positive.
struct SupconBatch {
  Matrix z;                 // 2m x d
  std::vector<int> labels;  // duplicated per view
};

SupconBatch stack_labeled(const Matrix& pa, const Matrix& pb,
                          const std::vector<std::size_t>& nodes,
                          const std::vector<int>& all_labels) {
  SupconBatch batch;
  const std::size_t m = nodes.size();
  batch.z = Matrix(2 * m, pa.cols());
  batch.labels.resize(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < pa.cols(); ++c) {
      batch.z(i, c) = pa(nodes[i], c);
      batch.z(m + i, c) = pb(nodes[i], c);
    }
    batch.labels[i] = all_labels[nodes[i]];
    batch.labels[m + i] = all_labels[nodes[i]];
  }
  return batch;
}

// Splits the stacked-batch gradient back onto full-size per-view matrices.
void unstack_grad(const Matrix& dz, const std::vector<std::size_t>& nodes,
                  Matrix& dpa, Matrix& dpb) {
  const std::size_t m = nodes.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < dz.cols(); ++c) {
      dpa(nodes[i], c) += dz(i, c);
      dpb(nodes[i], c) += dz(m + i, c);
    }
  }
}

}  // namespace

PretrainState::PretrainState(const GraphBundle& g, const LabelSplit& split,
                             const PretrainConfig& cfg, std::uint64_t seed)
    : g_(&g), cfg_(cfg) {
  if (cfg.hidden_dim == 0 || cfg.output_dim == 0)
    throw std::invalid_argument("encoder dimensions must be positive");

  if (cfg.objective == PretrainObjective::kCe) {
    std::vector<int> classes = split.train_classes;
    if (cfg.ce_uses_dev)
      classes.insert(classes.end(), split.dev_classes.begin(),
                     split.dev_classes.end());
    std::sort(classes.begin(), classes.end());
    labeled_nodes_ = nodes_with_classes(g, classes);
    if (labeled_nodes_.empty())
      throw std::invalid_argument("no nodes carry a supervised class");
    mapped_labels_.resize(labeled_nodes_.size());
    for (std::size_t i = 0; i < labeled_nodes_.size(); ++i) {
      const auto it = std::lower_bound(classes.begin(), classes.end(),
                                       g.labels[labeled_nodes_[i]]);
      mapped_labels_[i] = static_cast<int>(it - classes.begin());
    }
    params_ = init_encoder(
        {g.features.cols(), cfg.hidden_dim, cfg.output_dim, false}, seed);
    head_ = xavier_init(cfg.output_dim, classes.size(),
                        derive_seed(seed, {seed_ns::kHead}));
    adj_ = std::make_shared<const NormalizedAdjacency>(normalize_adjacency(g));
    x_ = std::make_shared<const Matrix>(g.features);
    return;
  }

  params_ = init_encoder(
      {g.features.cols(), cfg.hidden_dim, cfg.output_dim, true}, seed);
  if (cfg.objective == PretrainObjective::kSupCon ||
      cfg.objective == PretrainObjective::kJoint) {
    labeled_nodes_ = nodes_with_classes(g, split.train_classes);
    if (labeled_nodes_.empty())
      throw std::invalid_argument("no nodes carry a supervised class");
  }
  if (cfg.objective == PretrainObjective::kBootstrap) {
    predictor_ = xavier_init(cfg.output_dim, cfg.output_dim,
                             derive_seed(seed, {seed_ns::kHead}));
    target_.emplace(EmaTarget{params_, cfg.ema_decay});
  }
}

double PretrainState::step(std::uint64_t epoch_seed) {
  return cfg_.objective == PretrainObjective::kCe ? step_ce(epoch_seed)
                                                  : step_contrastive(epoch_seed);
}

double PretrainState::step_ce(std::uint64_t epoch_seed) {
  ForwardTape tape;
  const Matrix z =
      encoder_forward(params_, adj_, x_, ForwardMode::kTrain, cfg_.dropout,
                      derive_seed(epoch_seed, {seed_ns::kDropout, 0}), &tape);
  const Matrix z_sup = gather_rows(z, labeled_nodes_);
  const CeResult ce = ce_loss(matmul(z_sup, head_), mapped_labels_);

  const Matrix dhead = matmul_ta(z_sup, ce.dlogits);
  Matrix dz(z.rows(), z.cols());
  scatter_add_rows(dz, labeled_nodes_, matmul_tb(ce.dlogits, head_));
  const EncoderGrads eg = encoder_backward(params_, tape, dz);
  adam_step({&params_.w1, &params_.w2, &head_}, {&eg.dw1, &eg.dw2, &dhead},
            adam_, cfg_.adam);
  return ce.loss;
}

double PretrainState::step_contrastive(std::uint64_t epoch_seed) {
  const std::uint64_t seed_a = derive_seed(epoch_seed, {seed_ns::kAugmentA});
  const std::uint64_t seed_b = derive_seed(epoch_seed, {seed_ns::kAugmentB});
  ViewPass a = forward_view(params_, *g_, cfg_.augment, cfg_.dropout, seed_a,
                            derive_seed(epoch_seed, {seed_ns::kDropout, 0}));
  ViewPass b = forward_view(params_, *g_, cfg_.augment, cfg_.dropout, seed_b,
                            derive_seed(epoch_seed, {seed_ns::kDropout, 1}));

  double value = 0.0;
  Matrix dpa, dpb;
  Matrix dpred;  // bootstrap predictor gradient, when present
  switch (cfg_.objective) {
    case PretrainObjective::kInfoNce: {
      PairLossResult r = loss_info_nce(a.p, b.p, cfg_.temperature);
      value = r.value;
      dpa = std::move(r.du);
      dpb = std::move(r.dv);
      break;
    }
    case PretrainObjective::kJsd: {
      PairLossResult r =
          loss_jsd(a.p, b.p, derive_seed(epoch_seed, {seed_ns::kNegatives}));
      value = r.value;
      dpa = std::move(r.du);
      dpb = std::move(r.dv);
      break;
    }
    case PretrainObjective::kSupCon: {
      const SupconBatch batch = stack_labeled(a.p, b.p, labeled_nodes_, g_->labels);
      const SupconResult r = loss_supcon(batch.z, batch.labels, cfg_.temperature);
      value = r.value;
      dpa = Matrix(a.p.rows(), a.p.cols());
      dpb = Matrix(b.p.rows(), b.p.cols());
      unstack_grad(r.dz, labeled_nodes_, dpa, dpb);
      break;
    }
    case PretrainObjective::kJoint: {
      PairLossResult self = loss_info_nce(a.p, b.p, cfg_.temperature);
      const SupconBatch batch = stack_labeled(a.p, b.p, labeled_nodes_, g_->labels);
      const SupconResult sup = loss_supcon(batch.z, batch.labels, cfg_.temperature);
      Matrix dpa_sup(a.p.rows(), a.p.cols());
      Matrix dpb_sup(b.p.rows(), b.p.cols());
      unstack_grad(sup.dz, labeled_nodes_, dpa_sup, dpb_sup);
      LossWithGrads self_lg{self.value, {std::move(self.du), std::move(self.dv)}};
      LossWithGrads sup_lg{sup.value, {std::move(dpa_sup), std::move(dpb_sup)}};
      LossWithGrads mix = loss_joint(self_lg, sup_lg, cfg_.lambda);
      value = mix.value;
      dpa = std::move(mix.grads[0]);
      dpb = std::move(mix.grads[1]);
      break;
    }
    case PretrainObjective::kBootstrap: {
      // Each online view runs through the predictor and regresses onto the
      // frozen target's projection of the other view; the target branch gets
      // no gradient and trails the online weights by a moving average.
      const Matrix tb = forward_view_frozen(target_->params, *g_, cfg_.augment, seed_b);
      const Matrix ta = forward_view_frozen(target_->params, *g_, cfg_.augment, seed_a);
      const Matrix qa = matmul(a.p, predictor_);
      const Matrix qb = matmul(b.p, predictor_);
      const BootstrapResult r1 = loss_bootstrap(qa, tb);
      const BootstrapResult r2 = loss_bootstrap(qb, ta);
      value = 0.5 * (r1.value + r2.value);
      dpa = matmul_tb(r1.dp, predictor_);
      dpa *= 0.5;
      dpb = matmul_tb(r2.dp, predictor_);
      dpb *= 0.5;
      dpred = matmul_ta(a.p, r1.dp);
      dpred += matmul_ta(b.p, r2.dp);
      dpred *= 0.5;
      break;
    }
    case PretrainObjective::kCe:
      throw std::logic_error("ce handled separately");
  }

  // Backward through both views' projection heads and encoder passes, then
  // one optimizer step over every trained matrix.
  const ProjectionGrads ga = projection_backward(params_, a.z, a.proj_tape, dpa);
  const ProjectionGrads gb = projection_backward(params_, b.z, b.proj_tape, dpb);
  const EncoderGrads ea = encoder_backward(params_, a.tape, ga.dz);
  const EncoderGrads eb = encoder_backward(params_, b.tape, gb.dz);
  Matrix dw1 = ea.dw1;
  dw1 += eb.dw1;
  Matrix dw2 = ea.dw2;
  dw2 += eb.dw2;
  Matrix dwp1 = ga.dwp1;
  dwp1 += gb.dwp1;
  Matrix dwp2 = ga.dwp2;
  dwp2 += gb.dwp2;
  if (cfg_.objective == PretrainObjective::kBootstrap) {
    adam_step({&params_.w1, &params_.w2, &params_.wp1, &params_.wp2, &predictor_},
              {&dw1, &dw2, &dwp1, &dwp2, &dpred}, adam_, cfg_.adam);
    ema_update(*target_, params_);
  } else {
    adam_step({&params_.w1, &params_.w2, &params_.wp1, &params_.wp2},
              {&dw1, &dw2, &dwp1, &dwp2}, adam_, cfg_.adam);
  }
  return value;
}

PretrainObjective parse_objective(const std::string& name) {
  if (name == "ce") return PretrainObjective::kCe;
  if (name == "infonce") return PretrainObjective::kInfoNce;
  if (name == "jsd") return PretrainObjective::kJsd;
  if (name == "supcon") return PretrainObjective::kSupCon;
  if (name == "joint") return PretrainObjective::kJoint;
  if (name == "bootstrap") return PretrainObjective::kBootstrap;
  throw std::invalid_argument(
      "unknown objective '" + name +
      "' (expected ce, infonce, jsd, supcon, joint or bootstrap)");
}

std::string objective_name(PretrainObjective objective) {
  switch (objective) {
    case PretrainObjective::kCe: return "ce";
    case PretrainObjective::kInfoNce: return "infonce";
    case PretrainObjective::kJsd: return "jsd";
    case PretrainObjective::kSupCon: return "supcon";
    case PretrainObjective::kJoint: return "joint";
    case PretrainObjective::kBootstrap: return "bootstrap";
  }
  throw std::logic_error("unreachable");
}

PretrainResult pretrain_encoder(const GraphBundle& g, const LabelSplit& split,
                                const PretrainConfig& cfg, std::uint64_t seed) {
  if (cfg.epochs == 0)
    throw std::invalid_argument("pretraining needs at least one epoch");
  PretrainState state(g, split, cfg, seed);
  PretrainResult result;
  result.epoch_losses.reserve(cfg.epochs);
  // Epochs are 1-based so a stream stepped by the evaluation protocol (which
  // counts epochs from 1) sees exactly the same per-epoch seeds.
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch)
    result.epoch_losses.push_back(
        state.step(derive_seed(seed, {seed_ns::kEpoch, epoch})));
  result.params = state.params();
  return result;
}

Matrix embed_all(const EncoderParams& params, const GraphBundle& g) {
  const auto adj = std::make_shared<const NormalizedAdjacency>(normalize_adjacency(g));
  const auto x = std::make_shared<const Matrix>(g.features);
  return encoder_forward(params, adj, x, ForwardMode::kEval, 0.0, 0, nullptr);
}

}  // namespace fsnc
