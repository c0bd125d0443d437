#include "fsnc/probe.hpp"

#include "fsnc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace fsnc {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) v = std::max(v, std::fabs(m.data()[i]));
  return v;
}

}  // namespace

ProbeObjective probe_objective(const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                               const Matrix& b, double l2) {
  if (x.cols() != w.rows()) fail("probe: feature width does not match weights");
  if (b.rows() != 1 || b.cols() != w.cols()) fail("probe: bias shape mismatch");
  Matrix logits = matmul(x, w);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += b(0, j);
  CeResult ce = ce_loss(logits, labels);

  ProbeObjective obj;
  obj.loss = ce.loss + 0.5 * l2 * frobenius_norm(w) * frobenius_norm(w);
  obj.dw = matmul_ta(x, ce.dlogits);
  axpy(l2, w, obj.dw);
  obj.db = Matrix(1, w.cols());
  for (std::size_t i = 0; i < ce.dlogits.rows(); ++i)
    for (std::size_t j = 0; j < ce.dlogits.cols(); ++j) obj.db(0, j) += ce.dlogits(i, j);
  return obj;
}

LinearProbe fit_probe(const Matrix& embeddings, const std::vector<std::size_t>& nodes,
                      const std::vector<int>& labels, std::size_t n_classes,
                      const ProbeConfig& cfg) {
  if (nodes.empty()) fail("probe: empty support set");
  if (nodes.size() != labels.size()) fail("probe: one label per support node required");
  if (n_classes < 2) fail("probe: need at least 2 classes");
  if (cfg.l2 < 0.0 || cfg.lr <= 0.0 || cfg.max_iters < 1 || cfg.tol < 0.0)
    fail("probe: invalid optimizer settings");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) fail("probe: label out of range");

  Matrix x = gather_rows(embeddings, nodes);
  const std::size_t s = x.rows(), d = x.cols();

  // Support-set standardization; constant dims are centered but not scaled.
  std::vector<double> mean(d, 0.0), scale(d, 1.0);
  if (cfg.standardize) {
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(s);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = x(i, j) - mean[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(s));
      scale[j] = sd > 0.0 ? sd : 1.0;
    }
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < d; ++j) x(i, j) = (x(i, j) - mean[j]) / scale[j];
  }

  LinearProbe probe;
  Matrix w(d, n_classes), b(1, n_classes);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    ProbeObjective obj = probe_objective(x, labels, w, b, cfg.l2);
    probe.iters = it + 1;
    if (std::max(max_abs(obj.dw), max_abs(obj.db)) < cfg.tol) break;
    axpy(-cfg.lr, obj.dw, w);
    axpy(-cfg.lr, obj.db, b);
  }

  // Fold the standardization into the parameters:
  //   w'(x - mu)/sd + b'  ==  (w'/sd) x + (b' - w' mu/sd)
  probe.w = Matrix(d, n_classes);
  probe.b = b;
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t c = 0; c < n_classes; ++c) {
      probe.w(j, c) = w(j, c) / scale[j];
      probe.b(0, c) -= w(j, c) * mean[j] / scale[j];
    }
  return probe;
}

std::vector<int> probe_predict(const LinearProbe& probe, const Matrix& embeddings,
                               const std::vector<std::size_t>& nodes) {
  Matrix logits = matmul(gather_rows(embeddings, nodes), probe.w);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += probe.b(0, j);
  return argmax_rows(logits);
}

}  // namespace fsnc
