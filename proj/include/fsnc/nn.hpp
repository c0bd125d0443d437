#pragma once

#include "fsnc/graph.hpp"
#include "fsnc/matrix.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fsnc {

// Two-layer graph convolution: Z = A_hat * dropout(relu(A_hat * X * W1)) * W2,
// no biases, no nonlinearity on the output layer.  An optional two-layer MLP
// projection head (ELU in the middle) sits on top for contrastive training;
// downstream consumers always read the pre-projection embeddings.
struct EncoderConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 16;
  bool with_projection = false;
};

struct EncoderParams {
  Matrix w1;   // input_dim x hidden_dim
  Matrix w2;   // hidden_dim x output_dim
  Matrix wp1;  // output_dim x output_dim (projection head, may be empty)
  Matrix wp2;  // output_dim x output_dim

  bool has_projection() const { return !wp1.empty(); }
  std::vector<Matrix*> all();
  std::vector<const Matrix*> all() const;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); rows are fan-in.
Matrix xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

enum class ForwardMode { kTrain, kEval };

// Activations cached by a forward pass, enough to run the exact backward
// pass.  Graph and features are shared (never copied) since the same structure
// is reused across many forwards.
struct ForwardTape {
  std::shared_ptr<const NormalizedAdjacency> adj;
  std::shared_ptr<const Matrix> x;
  Matrix h1_pre;        // A_hat * X * W1, before relu
  Matrix dropout_mask;  // entries 0 or 1/(1-p); empty when inactive
  Matrix s2;            // A_hat * dropout(relu(h1_pre))
};

// Inverted dropout: in train mode with p > 0, hidden units are zeroed with
// probability p and survivors scaled by 1/(1-p); eval mode is deterministic.
// `tape` may be null when no backward pass will follow.
Matrix encoder_forward(const EncoderParams& p, std::shared_ptr<const NormalizedAdjacency> adj,
                       std::shared_ptr<const Matrix> x, ForwardMode mode, double dropout,
                       std::uint64_t seed, ForwardTape* tape);

struct EncoderGrads {
  Matrix dw1;
  Matrix dw2;
};

// Exact gradients of any scalar loss w.r.t. W1/W2 given d(loss)/d(embeddings).
EncoderGrads encoder_backward(const EncoderParams& p, const ForwardTape& tape, const Matrix& dz);

struct ProjectionTape {
  Matrix u1;  // z * wp1, pre-ELU
};

Matrix projection_forward(const EncoderParams& p, const Matrix& z, ProjectionTape* tape);

struct ProjectionGrads {
  Matrix dwp1;
  Matrix dwp2;
  Matrix dz;  // gradient flowing back into the encoder output
};

ProjectionGrads projection_backward(const EncoderParams& p, const Matrix& z,
                                    const ProjectionTape& tape, const Matrix& dout);

// Mean cross-entropy over rows with the exact softmax gradient.
struct CeResult {
  double loss = 0.0;
  Matrix dlogits;
};
CeResult ce_loss(const Matrix& logits, const std::vector<int>& labels);

// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& logits);

// Adam with bias correction and coupled L2 weight decay (g <- g + wd * p).
// Moment buffers are allocated on first use to match the parameter shapes.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

struct AdamHyper {
  double lr = 0.001;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamHyper& hp);

// Central-difference gradient audit: returns the maximum over all coordinates
// of |fd - analytic| / (|fd| + 1e-6), where fd uses a symmetric eps step.
double finite_diff_check(const std::function<double(const std::vector<Matrix>&)>& f,
                         const std::vector<Matrix>& at, const std::vector<Matrix>& analytic,
                         double eps = 1e-5);

// FSNP checkpoint: magic + u32 version + u32 layer count, per layer u32 rows,
// u32 cols and float64 little-endian row-major data.  Layers are stored in
// w1, w2 [, wp1, wp2] order.
void save_checkpoint(const std::string& path, const EncoderParams& p);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace fsnc
