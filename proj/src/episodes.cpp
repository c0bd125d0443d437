#include "fsnc/episodes.hpp"

#include "fsnc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fsnc {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

Episode sample_episode(const GraphBundle& g, const std::vector<int>& pool,
                       const EpisodeSpec& spec, std::uint64_t seed) {
  if (spec.n_way < 2) fail("episode: need at least 2 ways");
  if (spec.k_shot < 1 || spec.m_query < 1) fail("episode: K and M must be positive");
  if (pool.size() < spec.n_way)
    fail("episode: class pool has " + std::to_string(pool.size()) + " classes, need " +
         std::to_string(spec.n_way));
  const auto by_class = g.nodes_by_class();
  for (int cls : pool)
    if (cls < 0 || cls >= g.num_classes())
      fail("episode: class " + std::to_string(cls) + " not present in the graph");

  Rng rng(seed);
  const auto class_picks = rng.sample_indices(pool.size(), spec.n_way);

  Episode ep;
  ep.class_ids.reserve(spec.n_way);
  const std::size_t need = spec.k_shot + spec.m_query;
  for (std::size_t local = 0; local < spec.n_way; ++local) {
    const int cls = pool[class_picks[local]];
    ep.class_ids.push_back(cls);
    const auto& nodes = by_class[static_cast<std::size_t>(cls)];
    if (nodes.size() < need)
      fail("episode: class " + std::to_string(cls) + " has " + std::to_string(nodes.size()) +
           " nodes, need " + std::to_string(need));
    const auto picks = rng.sample_indices(nodes.size(), need);
    for (std::size_t i = 0; i < spec.k_shot; ++i) {
      ep.support_nodes.push_back(nodes[picks[i]]);
      ep.support_labels.push_back(static_cast<int>(local));
    }
    for (std::size_t i = spec.k_shot; i < need; ++i) {
      ep.query_nodes.push_back(nodes[picks[i]]);
      ep.query_labels.push_back(static_cast<int>(local));
    }
  }
  return ep;
}

namespace {

// Shared prototype/logit computation.  Logits: -||z_q - c_k||^2.
struct ProtoForward {
  Matrix prototypes;  // n_way x d
  Matrix logits;      // queries x n_way
  std::size_t n_way = 0;
  std::size_t shots = 0;
};

ProtoForward proto_forward(const Matrix& z, const Episode& ep) {
  if (ep.class_ids.empty() || ep.support_nodes.empty() || ep.query_nodes.empty())
    fail("protonet: empty episode");
  ProtoForward f;
  f.n_way = ep.class_ids.size();
  if (ep.support_nodes.size() % f.n_way != 0) fail("protonet: ragged support set");
  f.shots = ep.support_nodes.size() / f.n_way;
  const std::size_t d = z.cols();

  f.prototypes = Matrix(f.n_way, d);
  for (std::size_t s = 0; s < ep.support_nodes.size(); ++s) {
    if (ep.support_nodes[s] >= z.rows()) fail("protonet: support node out of range");
    const auto k = static_cast<std::size_t>(ep.support_labels[s]);
    const double* row = z.row(ep.support_nodes[s]);
    double* proto = f.prototypes.row(k);
    for (std::size_t j = 0; j < d; ++j) proto[j] += row[j];
  }
  f.prototypes *= 1.0 / static_cast<double>(f.shots);

  f.logits = Matrix(ep.query_nodes.size(), f.n_way);
  for (std::size_t q = 0; q < ep.query_nodes.size(); ++q) {
    if (ep.query_nodes[q] >= z.rows()) fail("protonet: query node out of range");
    const double* zq = z.row(ep.query_nodes[q]);
    for (std::size_t k = 0; k < f.n_way; ++k) {
      const double* ck = f.prototypes.row(k);
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = zq[j] - ck[j];
        dist += diff * diff;
      }
      f.logits(q, k) = -dist;
    }
  }
  return f;
}

}  // namespace

ProtoResult protonet_episode(const Matrix& z, const Episode& ep) {
  ProtoForward f = proto_forward(z, ep);
  const std::size_t d = z.cols();
  CeResult ce = ce_loss(f.logits, ep.query_labels);

  ProtoResult r;
  r.loss = ce.loss;
  r.predictions = argmax_rows(f.logits);
  r.dz = Matrix(z.rows(), d);

  // dlogit(q,k)/dz_q = -2 (z_q - c_k); dlogit(q,k)/dc_k = +2 (z_q - c_k);
  // dc_k spreads uniformly over class-k support rows.
  Matrix dproto(f.n_way, d);
  for (std::size_t q = 0; q < ep.query_nodes.size(); ++q) {
    const double* zq = z.row(ep.query_nodes[q]);
    double* dzq = r.dz.row(ep.query_nodes[q]);
    for (std::size_t k = 0; k < f.n_way; ++k) {
      const double g = ce.dlogits(q, k);
      if (g == 0.0) continue;
      const double* ck = f.prototypes.row(k);
      double* dck = dproto.row(k);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = 2.0 * (zq[j] - ck[j]);
        dzq[j] -= g * diff;
        dck[j] += g * diff;
      }
    }
  }
  const double inv_shots = 1.0 / static_cast<double>(f.shots);
  for (std::size_t s = 0; s < ep.support_nodes.size(); ++s) {
    const auto k = static_cast<std::size_t>(ep.support_labels[s]);
    const double* dck = dproto.row(k);
    double* dzs = r.dz.row(ep.support_nodes[s]);
    for (std::size_t j = 0; j < d; ++j) dzs[j] += inv_shots * dck[j];
  }
  return r;
}

std::vector<int> protonet_predict(const Matrix& z, const Episode& ep) {
  return argmax_rows(proto_forward(z, ep).logits);
}

std::vector<Matrix> gd_adapt(
    std::vector<Matrix> params,
    const std::function<std::vector<Matrix>(const std::vector<Matrix>&)>& grad_fn,
    std::size_t steps, double lr) {
  for (std::size_t s = 0; s < steps; ++s) {
    const std::vector<Matrix> grads = grad_fn(params);
    if (grads.size() != params.size()) fail("gd_adapt: gradient count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) axpy(-lr, grads[k], params[k]);
  }
  return params;
}

namespace {

// Support cross-entropy of encoder+head, with gradients w.r.t. w1, w2, head.
struct HeadLoss {
  double loss = 0.0;
  Matrix dw1, dw2, dhead;
  std::vector<int> predictions;  // of the nodes in `nodes`
};

HeadLoss head_ce(const EncoderParams& enc, const Matrix& head,
                 const std::shared_ptr<const NormalizedAdjacency>& adj,
                 const std::shared_ptr<const Matrix>& x, const std::vector<std::size_t>& nodes,
                 const std::vector<int>& labels, ForwardMode mode, double dropout,
                 std::uint64_t seed) {
  ForwardTape tape;
  Matrix z = encoder_forward(enc, adj, x, mode, dropout, seed, &tape);
  Matrix zs = gather_rows(z, nodes);
  Matrix logits = matmul(zs, head);
  CeResult ce = ce_loss(logits, labels);

  HeadLoss out;
  out.loss = ce.loss;
  out.predictions = argmax_rows(logits);
  out.dhead = matmul_ta(zs, ce.dlogits);
  Matrix dzs = matmul_tb(ce.dlogits, head);
  Matrix dz(z.rows(), z.cols());
  scatter_add_rows(dz, nodes, dzs);
  EncoderGrads eg = encoder_backward(enc, tape, dz);
  out.dw1 = std::move(eg.dw1);
  out.dw2 = std::move(eg.dw2);
  return out;
}

}  // namespace

AdaptedModel maml_inner_adapt(const EncoderParams& enc, const Matrix& head,
                              const std::shared_ptr<const NormalizedAdjacency>& adj,
                              const std::shared_ptr<const Matrix>& x, const Episode& ep,
                              std::size_t steps, double lr) {
  if (head.rows() != enc.w2.cols() || head.cols() != ep.class_ids.size())
    fail("maml: head shape does not match encoder output / episode ways");

  AdaptedModel out;
  out.initial_support_loss =
      head_ce(enc, head, adj, x, ep.support_nodes, ep.support_labels, ForwardMode::kEval, 0.0, 0)
          .loss;

  auto grad_fn = [&](const std::vector<Matrix>& p) {
    EncoderParams cur;
    cur.w1 = p[0];
    cur.w2 = p[1];
    HeadLoss hl = head_ce(cur, p[2], adj, x, ep.support_nodes, ep.support_labels,
                          ForwardMode::kEval, 0.0, 0);
    return std::vector<Matrix>{std::move(hl.dw1), std::move(hl.dw2), std::move(hl.dhead)};
  };
  std::vector<Matrix> adapted = gd_adapt({enc.w1, enc.w2, head}, grad_fn, steps, lr);

  out.enc.w1 = std::move(adapted[0]);
  out.enc.w2 = std::move(adapted[1]);
  out.head = std::move(adapted[2]);
  out.final_support_loss =
      head_ce(out.enc, out.head, adj, x, ep.support_nodes, ep.support_labels, ForwardMode::kEval,
              0.0, 0)
          .loss;
  return out;
}

MamlEpisodeResult maml_outer_step(const EncoderParams& enc,
                                  const std::shared_ptr<const NormalizedAdjacency>& adj,
                                  const std::shared_ptr<const Matrix>& x, const Episode& ep,
                                  const MamlConfig& cfg, std::uint64_t seed) {
  const Matrix head0 = xavier_init(enc.w2.cols(), ep.class_ids.size(),
                                   derive_seed(seed, {seed_ns::kHead}));
  AdaptedModel adapted = maml_inner_adapt(enc, head0, adj, x, ep, cfg.inner_steps, cfg.inner_lr);

  // First-order meta gradient: query-loss gradient at the adapted weights.
  HeadLoss q = head_ce(adapted.enc, adapted.head, adj, x, ep.query_nodes, ep.query_labels,
                       ForwardMode::kTrain, cfg.dropout, derive_seed(seed, {seed_ns::kDropout}));
  MamlEpisodeResult r;
  r.query_loss = q.loss;
  r.enc_grads.dw1 = std::move(q.dw1);
  r.enc_grads.dw2 = std::move(q.dw2);
  r.predictions = std::move(q.predictions);
  return r;
}

std::vector<int> maml_predict(const EncoderParams& enc,
                              const std::shared_ptr<const NormalizedAdjacency>& adj,
                              const std::shared_ptr<const Matrix>& x, const Episode& ep,
                              const MamlConfig& cfg, std::uint64_t seed) {
  const Matrix head0 = xavier_init(enc.w2.cols(), ep.class_ids.size(),
                                   derive_seed(seed, {seed_ns::kHead}));
  AdaptedModel adapted = maml_inner_adapt(enc, head0, adj, x, ep, cfg.inner_steps, cfg.inner_lr);
  Matrix z = encoder_forward(adapted.enc, adj, x, ForwardMode::kEval, 0.0, 0, nullptr);
  Matrix logits = matmul(gather_rows(z, ep.query_nodes), adapted.head);
  return argmax_rows(logits);
}

}  // namespace fsnc
