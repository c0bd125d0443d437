#include "fsnc/nn.hpp"

#include "fsnc/io.hpp"
#include "fsnc/rng.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fsnc {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  return out;
}

}  // namespace

std::vector<Matrix*> EncoderParams::all() {
  std::vector<Matrix*> v = {&w1, &w2};
  if (has_projection()) {
    v.push_back(&wp1);
    v.push_back(&wp2);
  }
  return v;
}

std::vector<const Matrix*> EncoderParams::all() const {
  std::vector<const Matrix*> v = {&w1, &w2};
  if (has_projection()) {
    v.push_back(&wp1);
    v.push_back(&wp2);
  }
  return v;
}

Matrix xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
  return m;
}

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.input_dim == 0 || cfg.hidden_dim == 0 || cfg.output_dim == 0)
    fail("encoder: all layer widths must be positive");
  EncoderParams p;
  p.w1 = xavier_init(cfg.input_dim, cfg.hidden_dim, derive_seed(seed, {seed_ns::kInit, 0}));
  p.w2 = xavier_init(cfg.hidden_dim, cfg.output_dim, derive_seed(seed, {seed_ns::kInit, 1}));
  if (cfg.with_projection) {
    p.wp1 = xavier_init(cfg.output_dim, cfg.output_dim, derive_seed(seed, {seed_ns::kInit, 2}));
    p.wp2 = xavier_init(cfg.output_dim, cfg.output_dim, derive_seed(seed, {seed_ns::kInit, 3}));
  }
  return p;
}

Matrix encoder_forward(const EncoderParams& p, std::shared_ptr<const NormalizedAdjacency> adj,
                       std::shared_ptr<const Matrix> x, ForwardMode mode, double dropout,
                       std::uint64_t seed, ForwardTape* tape) {
  if (!adj || !x) fail("encoder_forward: null graph inputs");
  if (x->rows() != adj->n) fail("encoder_forward: feature/adjacency size mismatch");
  if (x->cols() != p.w1.rows()) fail("encoder_forward: feature dim does not match W1");
  if (dropout < 0.0 || dropout >= 1.0) fail("encoder_forward: dropout must be in [0,1)");

  Matrix h1_pre = spmm(*adj, matmul(*x, p.w1));
  Matrix h1 = relu(h1_pre);

  Matrix mask;
  if (mode == ForwardMode::kTrain && dropout > 0.0) {
    mask = Matrix(h1.rows(), h1.cols());
    const double scale = 1.0 / (1.0 - dropout);
    Rng rng(seed);
    for (std::size_t i = 0; i < mask.size(); ++i)
      mask.data()[i] = rng.flip(dropout) ? 0.0 : scale;
    hadamard_inplace(h1, mask);
  }

  Matrix s2 = spmm(*adj, h1);
  Matrix z = matmul(s2, p.w2);

  if (tape) {
    tape->adj = std::move(adj);
    tape->x = std::move(x);
    tape->h1_pre = std::move(h1_pre);
    tape->dropout_mask = std::move(mask);
    tape->s2 = std::move(s2);
  }
  return z;
}

EncoderGrads encoder_backward(const EncoderParams& p, const ForwardTape& tape, const Matrix& dz) {
  if (!tape.adj || !tape.x) fail("encoder_backward: tape was not recorded");
  EncoderGrads g;
  g.dw2 = matmul_ta(tape.s2, dz);
  Matrix ds2 = matmul_tb(dz, p.w2);      // n x hidden
  Matrix dh1 = spmm(*tape.adj, ds2);     // A_hat is symmetric
  if (!tape.dropout_mask.empty()) hadamard_inplace(dh1, tape.dropout_mask);
  // relu gate from the pre-activation sign
  for (std::size_t i = 0; i < dh1.size(); ++i)
    if (tape.h1_pre.data()[i] <= 0.0) dh1.data()[i] = 0.0;
  Matrix dz1 = spmm(*tape.adj, dh1);
  g.dw1 = matmul_ta(*tape.x, dz1);
  return g;
}

Matrix projection_forward(const EncoderParams& p, const Matrix& z, ProjectionTape* tape) {
  if (!p.has_projection()) fail("projection_forward: encoder has no projection head");
  Matrix u1 = matmul(z, p.wp1);
  Matrix a1 = u1;
  for (std::size_t i = 0; i < a1.size(); ++i)
    if (a1.data()[i] < 0.0) a1.data()[i] = std::expm1(a1.data()[i]);  // ELU, alpha = 1
  Matrix out = matmul(a1, p.wp2);
  if (tape) tape->u1 = std::move(u1);
  return out;
}

ProjectionGrads projection_backward(const EncoderParams& p, const Matrix& z,
                                    const ProjectionTape& tape, const Matrix& dout) {
  // Recompute the cheap ELU output instead of taping it.
  Matrix a1 = tape.u1;
  for (std::size_t i = 0; i < a1.size(); ++i)
    if (a1.data()[i] < 0.0) a1.data()[i] = std::expm1(a1.data()[i]);
  ProjectionGrads g;
  g.dwp2 = matmul_ta(a1, dout);
  Matrix da1 = matmul_tb(dout, p.wp2);
  // d(elu)/du = 1 for u > 0, exp(u) = a + 1 otherwise
  for (std::size_t i = 0; i < da1.size(); ++i)
    if (tape.u1.data()[i] <= 0.0) da1.data()[i] *= a1.data()[i] + 1.0;
  g.dwp1 = matmul_ta(z, da1);
  g.dz = matmul_tb(da1, p.wp1);
  return g;
}

CeResult ce_loss(const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows()) fail("ce_loss: one label per row required");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (n == 0) fail("ce_loss: empty batch");
  CeResult r;
  r.dlogits = Matrix(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) fail("ce_loss: label out of range");
    const double* row = logits.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    double* d = r.dlogits.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      d[j] = std::exp(row[j] - mx);
      sum += d[j];
    }
    r.loss += (std::log(sum) + mx - row[static_cast<std::size_t>(y)]) * inv_n;
    const double inv_sum = inv_n / sum;
    for (std::size_t j = 0; j < c; ++j) d[j] *= inv_sum;
    d[static_cast<std::size_t>(y)] -= inv_n;
  }
  return r;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (row[j] > row[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamHyper& hp) {
  if (params.size() != grads.size()) fail("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != params.size()) fail("adam_step: state does not match parameter list");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    if (!p.same_shape(g) || !p.same_shape(state.m[k]))
      fail("adam_step: shape mismatch at parameter " + std::to_string(k));
    double* pd = p.data();
    const double* gd = g.data();
    double* md = state.m[k].data();
    double* vd = state.v[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = gd[i] + hp.weight_decay * pd[i];
      md[i] = hp.beta1 * md[i] + (1.0 - hp.beta1) * gi;
      vd[i] = hp.beta2 * vd[i] + (1.0 - hp.beta2) * gi * gi;
      const double mhat = md[i] / bc1;
      const double vhat = vd[i] / bc2;
      pd[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

double finite_diff_check(const std::function<double(const std::vector<Matrix>&)>& f,
                         const std::vector<Matrix>& at, const std::vector<Matrix>& analytic,
                         double eps) {
  if (at.size() != analytic.size()) fail("finite_diff_check: grads/params count mismatch");
  std::vector<Matrix> point = at;
  double worst = 0.0;
  for (std::size_t k = 0; k < point.size(); ++k) {
    if (!point[k].same_shape(analytic[k])) fail("finite_diff_check: shape mismatch");
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double saved = point[k].data()[i];
      point[k].data()[i] = saved + eps;
      const double up = f(point);
      point[k].data()[i] = saved - eps;
      const double down = f(point);
      point[k].data()[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double rel = std::fabs(fd - analytic[k].data()[i]) / (std::fabs(fd) + 1e-6);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// --- FSNP checkpoints ---------------------------------------------------------

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

double read_f64(const std::string& b, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const EncoderParams& p) {
  std::string bytes = "FSNP";
  append_u32(bytes, 1);  // format version
  const auto layers = p.all();
  append_u32(bytes, static_cast<std::uint32_t>(layers.size()));
  for (const Matrix* layer : layers) {
    append_u32(bytes, static_cast<std::uint32_t>(layer->rows()));
    append_u32(bytes, static_cast<std::uint32_t>(layer->cols()));
    for (std::size_t i = 0; i < layer->size(); ++i) append_f64(bytes, layer->data()[i]);
  }
  atomic_write_file(path, bytes);
}

EncoderParams load_checkpoint(const std::string& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "FSNP") != 0)
    fail(path + ": not an FSNP checkpoint");
  if (read_u32(bytes, 4) != 1) fail(path + ": unsupported FSNP version");
  const std::uint32_t count = read_u32(bytes, 8);
  if (count != 2 && count != 4)
    fail(path + ": expected 2 or 4 layers, found " + std::to_string(count));
  std::vector<Matrix> layers;
  std::size_t off = 12;
  for (std::uint32_t k = 0; k < count; ++k) {
    if (off + 8 > bytes.size()) fail(path + ": truncated checkpoint");
    const std::size_t rows = read_u32(bytes, off);
    const std::size_t cols = read_u32(bytes, off + 4);
    off += 8;
    if (off + 8 * rows * cols > bytes.size()) fail(path + ": truncated checkpoint");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i, off += 8) m.data()[i] = read_f64(bytes, off);
    layers.push_back(std::move(m));
  }
  if (off != bytes.size()) fail(path + ": trailing bytes in checkpoint");
  EncoderParams p;
  p.w1 = std::move(layers[0]);
  p.w2 = std::move(layers[1]);
  if (count == 4) {
    p.wp1 = std::move(layers[2]);
    p.wp2 = std::move(layers[3]);
  }
  if (p.w1.cols() != p.w2.rows()) fail(path + ": inconsistent layer shapes");
  if (p.has_projection() &&
      (p.wp1.rows() != p.w2.cols() || p.wp1.cols() != p.wp2.rows() ||
       p.wp2.cols() != p.w2.cols()))
    fail(path + ": inconsistent projection shapes");
  return p;
}

}  // namespace fsnc
