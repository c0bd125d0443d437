#include "fsnc/gradcheck.hpp"

#include <memory>

#include "fsnc/contrast.hpp"
#include "fsnc/episodes.hpp"
#include "fsnc/graph.hpp"
#include "fsnc/nn.hpp"
#include "fsnc/probe.hpp"
#include "fsnc/rng.hpp"

namespace fsnc {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// A connected-enough random graph on 5..8 nodes with gaussian features.
GraphBundle random_graph(Rng& rng, std::size_t feature_dim) {
  GraphBundle g;
  const std::size_t n = 5 + rng.below(4);
  g.features = random_matrix(rng, n, feature_dim);
  g.labels.assign(n, 0);
  for (std::size_t v = 0; v < n; ++v) g.labels[v] = static_cast<int>(v % 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.flip(0.4)) g.edges.push_back({i, j});
  return g;
}

double dot_all(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

// Worst relative error for the graph encoder, eval or train mode, against a
// random linear readout sum(Z * T).
double audit_encoder(Rng& rng, ForwardMode mode) {
  const GraphBundle g = random_graph(rng, 4);
  const auto adj = std::make_shared<const NormalizedAdjacency>(normalize_adjacency(g));
  const auto x = std::make_shared<const Matrix>(g.features);
  EncoderParams p = init_encoder({4, 5, 3, false}, rng.next());
  const double dropout = mode == ForwardMode::kTrain ? 0.5 : 0.0;
  const std::uint64_t drop_seed = rng.next();
  const Matrix target = random_matrix(rng, g.labels.size(), 3);

  ForwardTape tape;
  encoder_forward(p, adj, x, mode, dropout, drop_seed, &tape);
  const EncoderGrads grads = encoder_backward(p, tape, target);

  auto f = [&](const std::vector<Matrix>& ps) {
    EncoderParams q = p;
    q.w1 = ps[0];
    q.w2 = ps[1];
    return dot_all(
        encoder_forward(q, adj, x, mode, dropout, drop_seed, nullptr), target);
  };
  return finite_diff_check(f, {p.w1, p.w2}, {grads.dw1, grads.dw2});
}

double audit_projection(Rng& rng) {
  const std::size_t n = 4 + rng.below(4), d = 3;
  EncoderParams p = init_encoder({d, d, d, true}, rng.next());
  const Matrix z = random_matrix(rng, n, d);
  const Matrix target = random_matrix(rng, n, d);

  ProjectionTape tape;
  projection_forward(p, z, &tape);
  const ProjectionGrads grads = projection_backward(p, z, tape, target);

  auto f = [&](const std::vector<Matrix>& ps) {
    EncoderParams q = p;
    q.wp1 = ps[0];
    q.wp2 = ps[1];
    return dot_all(projection_forward(q, ps[2], nullptr), target);
  };
  return finite_diff_check(f, {p.wp1, p.wp2, z},
                           {grads.dwp1, grads.dwp2, grads.dz});
}

double audit_ce(Rng& rng) {
  const std::size_t n = 3 + rng.below(5), c = 2 + rng.below(3);
  const Matrix logits = random_matrix(rng, n, c);
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(c));
  const CeResult res = ce_loss(logits, labels);
  auto f = [&](const std::vector<Matrix>& ps) {
    return ce_loss(ps[0], labels).loss;
  };
  return finite_diff_check(f, {logits}, {res.dlogits});
}

double audit_info_nce(Rng& rng) {
  const std::size_t n = 3 + rng.below(5), d = 3;
  const Matrix u = random_matrix(rng, n, d), v = random_matrix(rng, n, d);
  const PairLossResult res = loss_info_nce(u, v, 0.5);
  auto f = [&](const std::vector<Matrix>& ps) {
    return loss_info_nce(ps[0], ps[1], 0.5).value;
  };
  return finite_diff_check(f, {u, v}, {res.du, res.dv});
}

double audit_jsd(Rng& rng) {
  const std::size_t n = 3 + rng.below(5), d = 3;
  const Matrix u = random_matrix(rng, n, d), v = random_matrix(rng, n, d);
  const std::uint64_t seed = rng.next();
  const PairLossResult res = loss_jsd(u, v, seed);
  auto f = [&](const std::vector<Matrix>& ps) {
    return loss_jsd(ps[0], ps[1], seed).value;
  };
  return finite_diff_check(f, {u, v}, {res.du, res.dv});
}

double audit_supcon(Rng& rng) {
  const std::size_t n = 4 + rng.below(5), d = 3;
  const Matrix z = random_matrix(rng, n, d);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  const SupconResult res = loss_supcon(z, labels, 0.5);
  auto f = [&](const std::vector<Matrix>& ps) {
    return loss_supcon(ps[0], labels, 0.5).value;
  };
  return finite_diff_check(f, {z}, {res.dz});
}

double audit_bootstrap(Rng& rng) {
  const std::size_t n = 3 + rng.below(6), d = 4;
  const Matrix p = random_matrix(rng, n, d), t = random_matrix(rng, n, d);
  const BootstrapResult res = loss_bootstrap(p, t);
  auto f = [&](const std::vector<Matrix>& ps) {
    return loss_bootstrap(ps[0], t).value;
  };
  return finite_diff_check(f, {p}, {res.dp});
}

// The online predictor composition q = p * Q regressed onto a fixed target,
// with the loss gradient chained into both the projection and the predictor.
double audit_bootstrap_predictor(Rng& rng) {
  const std::size_t n = 3 + rng.below(6), d = 4;
  const Matrix p = random_matrix(rng, n, d), t = random_matrix(rng, n, d);
  const Matrix q = random_matrix(rng, d, d);
  const BootstrapResult res = loss_bootstrap(matmul(p, q), t);
  const Matrix dp = matmul_tb(res.dp, q);
  const Matrix dq = matmul_ta(p, res.dp);
  auto f = [&](const std::vector<Matrix>& ps) {
    return loss_bootstrap(matmul(ps[0], ps[1]), t).value;
  };
  return finite_diff_check(f, {p, q}, {dp, dq});
}

double audit_protonet(Rng& rng) {
  const std::size_t k = 1 + rng.below(2), m = 1 + rng.below(2);
  const std::size_t n = 2 * (k + m);
  const Matrix z = random_matrix(rng, n, 3);
  Episode ep;
  ep.class_ids = {0, 1};
  std::size_t row = 0;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      ep.support_nodes.push_back(row++);
      ep.support_labels.push_back(c);
    }
  }
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      ep.query_nodes.push_back(row++);
      ep.query_labels.push_back(c);
    }
  }
  const ProtoResult res = protonet_episode(z, ep);
  auto f = [&](const std::vector<Matrix>& ps) {
    return protonet_episode(ps[0], ep).loss;
  };
  return finite_diff_check(f, {z}, {res.dz});
}

double audit_probe_objective(Rng& rng) {
  const std::size_t n = 4 + rng.below(5), d = 3, c = 2 + rng.below(2);
  const Matrix x = random_matrix(rng, n, d);
  const Matrix w = random_matrix(rng, d, c), b = random_matrix(rng, 1, c);
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(c));
  const ProbeObjective res = probe_objective(x, labels, w, b, 1e-2);
  auto f = [&](const std::vector<Matrix>& ps) {
    return probe_objective(x, labels, ps[0], ps[1], 1e-2).loss;
  };
  return finite_diff_check(f, {w, b}, {res.dw, res.db});
}

}  // namespace

std::vector<GradientAuditResult> gradient_audit(std::size_t draws,
                                                std::uint64_t seed) {
  struct Path {
    const char* name;
    double (*run)(Rng&);
  };
  static constexpr Path kPaths[] = {
      {"encoder/eval",
       [](Rng& r) { return audit_encoder(r, ForwardMode::kEval); }},
      {"encoder/train-dropout",
       [](Rng& r) { return audit_encoder(r, ForwardMode::kTrain); }},
      {"projection-head", audit_projection},
      {"cross-entropy", audit_ce},
      {"info-nce", audit_info_nce},
      {"jsd", audit_jsd},
      {"supcon", audit_supcon},
      {"bootstrap", audit_bootstrap},
      {"bootstrap-predictor", audit_bootstrap_predictor},
      {"protonet-episode", audit_protonet},
      {"probe-objective", audit_probe_objective},
  };

  std::vector<GradientAuditResult> results;
  std::size_t path_idx = 0;
  for (const Path& path : kPaths) {
    GradientAuditResult out;
    out.name = path.name;
    for (std::size_t d = 0; d < draws; ++d) {
      Rng rng(derive_seed(seed, {path_idx, d}));
      out.worst = std::max(out.worst, path.run(rng));
    }
    results.push_back(out);
    ++path_idx;
  }
  return results;
}

}  // namespace fsnc
