#include "fsnc/contrast.hpp"

#include "fsnc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fsnc {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

constexpr double kNormFloor = 1e-12;

// Row norms (floored) and the row-normalized matrix.
struct Normalized {
  Matrix unit;               // rows a_i / max(||a_i||, floor)
  std::vector<double> norm;  // floored norms
};

Normalized normalize_rows(const Matrix& a) {
  Normalized out;
  out.unit = a;
  out.norm.resize(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const double* r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * r[j];
    const double n = std::max(std::sqrt(s), kNormFloor);
    out.norm[i] = n;
    double* u = out.unit.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) u[j] /= n;
  }
  return out;
}

// Maps a gradient w.r.t. the normalized rows back to the raw rows:
//   d a_i = (g_i - (u_i . g_i) u_i) / ||a_i||.
Matrix denormalize_grad(const Normalized& n, const Matrix& g) {
  Matrix out(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double* u = n.unit.row(i);
    const double* gi = g.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j) dot += u[j] * gi[j];
    double* o = out.row(i);
    const double inv = 1.0 / n.norm[i];
    for (std::size_t j = 0; j < g.cols(); ++j) o[j] = (gi[j] - dot * u[j]) * inv;
  }
  return out;
}

double stable_softplus(double x) {
  return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

GraphBundle augment_view(const GraphBundle& g, const AugmentSpec& spec, std::uint64_t seed) {
  if (spec.edge_drop < 0.0 || spec.edge_drop > 1.0 || spec.feature_mask < 0.0 ||
      spec.feature_mask > 1.0)
    fail("augment: probabilities must be in [0,1]");
  GraphBundle out;
  out.labels = g.labels;

  Rng edge_rng(derive_seed(seed, {0}));
  out.edges.reserve(g.edges.size());
  for (const auto& e : g.edges)
    if (!edge_rng.flip(spec.edge_drop)) out.edges.push_back(e);

  Rng col_rng(derive_seed(seed, {1}));
  std::vector<bool> keep(g.feature_dim());
  for (std::size_t j = 0; j < keep.size(); ++j) keep[j] = !col_rng.flip(spec.feature_mask);
  out.features = Matrix(g.num_nodes(), g.feature_dim());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const double* src = g.features.row(i);
    double* dst = out.features.row(i);
    for (std::size_t j = 0; j < g.feature_dim(); ++j) dst[j] = keep[j] ? src[j] : 0.0;
  }
  return out;
}

PairLossResult loss_info_nce(const Matrix& u, const Matrix& v, double temperature) {
  if (!u.same_shape(v)) fail("info_nce: view shapes differ");
  if (u.rows() < 2) fail("info_nce: need at least 2 nodes for negatives");
  if (temperature <= 0.0) fail("info_nce: temperature must be positive");
  const std::size_t n = u.rows();
  const double inv_t = 1.0 / temperature;

  Normalized nu = normalize_rows(u);
  Normalized nv = normalize_rows(v);

  // Scaled similarities; exp once, reuse everywhere.
  Matrix euv(n, n), euu(n, n), evv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double suv = 0.0, suu = 0.0, svv = 0.0;
      const double* ui = nu.unit.row(i);
      const double* uj = nu.unit.row(j);
      const double* vi = nv.unit.row(i);
      const double* vj = nv.unit.row(j);
      for (std::size_t k = 0; k < u.cols(); ++k) {
        suv += ui[k] * vj[k];
        suu += ui[k] * uj[k];
        svv += vi[k] * vj[k];
      }
      euv(i, j) = std::exp(suv * inv_t);
      euu(i, j) = std::exp(suu * inv_t);
      evv(i, j) = std::exp(svv * inv_t);
    }

  PairLossResult r;
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  // Coefficients dL/dS for the three similarity blocks (diagonals of the
  // intra blocks stay zero: a node is never its own negative).
  Matrix a(n, n), b(n, n), c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double denom_u = 0.0, denom_v = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      denom_u += euv(i, j);
      denom_v += euv(j, i);
      if (j != i) {
        denom_u += euu(i, j);
        denom_v += evv(i, j);
      }
    }
    r.value += scale * (std::log(denom_u) + std::log(denom_v) - 2.0 * std::log(euv(i, i)));
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) += scale * euv(i, j) / denom_u;  // u_i anchored
      a(j, i) += scale * euv(j, i) / denom_v;  // v_i anchored
      if (j != i) {
        b(i, j) = scale * euu(i, j) / denom_u;
        c(i, j) = scale * evv(i, j) / denom_v;
      }
    }
    a(i, i) -= 2.0 * scale;
  }

  // dU^ = (A V^ + (B + B^T) U^) / tau, dV^ = (A^T U^ + (C + C^T) V^) / tau
  Matrix du_hat = matmul(a, nv.unit);
  du_hat += matmul(b, nu.unit);
  du_hat += matmul_ta(b, nu.unit);
  du_hat *= inv_t;
  Matrix dv_hat = matmul_ta(a, nu.unit);
  dv_hat += matmul(c, nv.unit);
  dv_hat += matmul_ta(c, nv.unit);
  dv_hat *= inv_t;

  r.du = denormalize_grad(nu, du_hat);
  r.dv = denormalize_grad(nv, dv_hat);
  return r;
}

PairLossResult loss_jsd(const Matrix& u, const Matrix& v, std::uint64_t seed) {
  if (!u.same_shape(v)) fail("jsd: view shapes differ");
  const std::size_t n = u.rows();
  if (n < 2) fail("jsd: need at least 2 nodes for a derangement");

  // Sattolo's algorithm: a uniformly random single-cycle permutation, which
  // is automatically fixed-point free.
  std::vector<std::size_t> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = i;
  Rng rng(derive_seed(seed, {seed_ns::kNegatives}));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(pi[i], pi[j]);
  }

  PairLossResult r;
  r.du = Matrix(n, u.cols());
  r.dv = Matrix(n, u.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ui = u.row(i);
    const double* vi = v.row(i);
    const double* vn = v.row(pi[i]);
    double pos = 0.0, neg = 0.0;
    for (std::size_t k = 0; k < u.cols(); ++k) {
      pos += ui[k] * vi[k];
      neg += ui[k] * vn[k];
    }
    // -log sigmoid(pos) = softplus(-pos);  -log(1 - sigmoid(neg)) = softplus(neg)
    r.value += inv_n * (stable_softplus(-pos) + stable_softplus(neg));
    const double wp = inv_n * (stable_sigmoid(pos) - 1.0);
    const double wn = inv_n * stable_sigmoid(neg);
    double* dui = r.du.row(i);
    double* dvi = r.dv.row(i);
    double* dvn = r.dv.row(pi[i]);
    for (std::size_t k = 0; k < u.cols(); ++k) {
      dui[k] += wp * vi[k] + wn * vn[k];
      dvi[k] += wp * ui[k];
      dvn[k] += wn * ui[k];
    }
  }
  return r;
}

SupconResult loss_supcon(const Matrix& z, const std::vector<int>& labels, double temperature) {
  if (labels.size() != z.rows()) fail("supcon: one label per row required");
  if (temperature <= 0.0) fail("supcon: temperature must be positive");
  const std::size_t n = z.rows();
  const double inv_t = 1.0 / temperature;

  Normalized nz = normalize_rows(z);
  Matrix es(n, n);  // exp(cos/tau), diagonal unused
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      const double* a = nz.unit.row(i);
      const double* b = nz.unit.row(j);
      for (std::size_t k = 0; k < z.cols(); ++k) s += a[k] * b[k];
      es(i, j) = std::exp(s * inv_t);
    }

  std::size_t valid = 0;
  std::vector<std::size_t> pos_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) ++pos_count[i];
    if (pos_count[i] > 0) ++valid;
  }
  if (valid == 0) fail("supcon: no anchor has a same-label positive");
  const double inv_valid = 1.0 / static_cast<double>(valid);

  SupconResult r;
  Matrix w(n, n);  // dL/dS coefficients, diagonal zero
  for (std::size_t i = 0; i < n; ++i) {
    if (pos_count[i] == 0) continue;
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) denom += es(i, j);
    const double inv_pos = 1.0 / static_cast<double>(pos_count[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double soft = es(i, j) / denom;
      if (labels[j] == labels[i]) {
        r.value += inv_valid * inv_pos * (std::log(denom) - std::log(es(i, j)));
        w(i, j) = inv_valid * (soft - inv_pos);
      } else {
        w(i, j) = inv_valid * soft;
      }
    }
  }

  Matrix dz_hat = matmul(w, nz.unit);
  dz_hat += matmul_ta(w, nz.unit);
  dz_hat *= inv_t;
  r.dz = denormalize_grad(nz, dz_hat);
  return r;
}

BootstrapResult loss_bootstrap(const Matrix& p, const Matrix& t) {
  if (!p.same_shape(t)) fail("bootstrap: prediction/target shapes differ");
  if (p.rows() == 0) fail("bootstrap: empty batch");
  const std::size_t n = p.rows();
  Normalized np = normalize_rows(p);
  Normalized nt = normalize_rows(t);
  BootstrapResult r;
  r.dp = Matrix(n, p.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = np.unit.row(i);
    const double* b = nt.unit.row(i);
    double cos = 0.0;
    for (std::size_t k = 0; k < p.cols(); ++k) cos += a[k] * b[k];
    r.value += inv_n * (2.0 - 2.0 * cos);
    // d/dp_i of -2 cos = -2 (t^_i - cos p^_i) / ||p_i||
    double* d = r.dp.row(i);
    const double scale = -2.0 * inv_n / np.norm[i];
    for (std::size_t k = 0; k < p.cols(); ++k) d[k] = scale * (b[k] - cos * a[k]);
  }
  return r;
}

void ema_update(EmaTarget& target, const EncoderParams& online) {
  if (target.decay < 0.0 || target.decay > 1.0) fail("ema: decay must be in [0,1]");
  auto t = target.params.all();
  auto o = online.all();
  if (t.size() != o.size()) fail("ema: online/target parameter structure mismatch");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!t[k]->same_shape(*o[k])) fail("ema: shape mismatch at layer " + std::to_string(k));
    double* td = t[k]->data();
    const double* od = o[k]->data();
    for (std::size_t i = 0; i < t[k]->size(); ++i)
      td[i] = target.decay * td[i] + (1.0 - target.decay) * od[i];
  }
}

LossWithGrads loss_joint(const LossWithGrads& self_loss, const LossWithGrads& sup_loss,
                         double lambda) {
  if (lambda < 0.0 || lambda > 1.0) fail("joint: lambda must be in [0,1]");
  if (self_loss.grads.size() != sup_loss.grads.size())
    fail("joint: gradient lists cover different parameters");
  LossWithGrads out;
  out.value = lambda * self_loss.value + (1.0 - lambda) * sup_loss.value;
  out.grads.reserve(self_loss.grads.size());
  for (std::size_t k = 0; k < self_loss.grads.size(); ++k) {
    if (!self_loss.grads[k].same_shape(sup_loss.grads[k]))
      fail("joint: gradient shape mismatch at parameter " + std::to_string(k));
    Matrix g = self_loss.grads[k];
    g *= lambda;
    axpy(1.0 - lambda, sup_loss.grads[k], g);
    out.grads.push_back(std::move(g));
  }
  return out;
}

}  // namespace fsnc
