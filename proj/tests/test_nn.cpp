#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fsnc/graph.hpp"
#include "fsnc/io.hpp"
#include "fsnc/nn.hpp"
#include "fsnc/rng.hpp"

#include <cmath>
#include <filesystem>
#include <memory>

using namespace fsnc;

namespace {

struct TinyGraph {
  std::shared_ptr<const NormalizedAdjacency> adj;
  std::shared_ptr<const Matrix> x;
};

TinyGraph random_graph(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  GraphBundle g;
  g.features = Matrix(n, d);
  for (std::size_t i = 0; i < g.features.size(); ++i)
    g.features.data()[i] = rng.uniform(-1.0, 1.0);
  g.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) g.labels[i] = static_cast<int>(i % 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.flip(0.4)) g.edges.emplace_back(i, j);
  TinyGraph t;
  t.adj = std::make_shared<const NormalizedAdjacency>(normalize_adjacency(g));
  t.x = std::make_shared<const Matrix>(std::move(g.features));
  return t;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

double weighted_sum(const Matrix& z, const Matrix& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += z.data()[i] * c.data()[i];
  return s;
}

}  // namespace

TEST_CASE("xavier init respects the fan-based bound and is seed-stable") {
  Matrix a = xavier_init(30, 20, 5), b = xavier_init(30, 20, 5), c = xavier_init(30, 20, 6);
  const double bound = std::sqrt(6.0 / 50.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.data()[i] < bound);
    REQUIRE(a.data()[i] > -bound);
  }
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK(max_abs_diff(a, c) > 0.0);
}

TEST_CASE("forward: eval is deterministic, train dropout is seeded") {
  auto g = random_graph(7, 5, 11);
  EncoderParams p = init_encoder({5, 4, 3, false}, 1);
  Matrix e1 = encoder_forward(p, g.adj, g.x, ForwardMode::kEval, 0.5, 0, nullptr);
  Matrix e2 = encoder_forward(p, g.adj, g.x, ForwardMode::kEval, 0.5, 99, nullptr);
  CHECK(max_abs_diff(e1, e2) == 0.0);

  Matrix t1 = encoder_forward(p, g.adj, g.x, ForwardMode::kTrain, 0.5, 7, nullptr);
  Matrix t2 = encoder_forward(p, g.adj, g.x, ForwardMode::kTrain, 0.5, 7, nullptr);
  Matrix t3 = encoder_forward(p, g.adj, g.x, ForwardMode::kTrain, 0.5, 8, nullptr);
  CHECK(max_abs_diff(t1, t2) == 0.0);
  CHECK(max_abs_diff(t1, t3) > 0.0);

  // p = 0 in train mode is exactly the eval path
  Matrix t0 = encoder_forward(p, g.adj, g.x, ForwardMode::kTrain, 0.0, 7, nullptr);
  CHECK(max_abs_diff(t0, e1) == 0.0);

  CHECK_THROWS_AS(encoder_forward(p, g.adj, g.x, ForwardMode::kTrain, 1.0, 7, nullptr),
                  std::invalid_argument);
}

TEST_CASE("encoder backward matches central finite differences") {
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    auto g = random_graph(5 + trial % 4, 4, 100 + trial);
    EncoderParams p = init_encoder({4, 4, 3, false}, 200 + trial);
    const bool train = trial % 2 == 1;
    const ForwardMode mode = train ? ForwardMode::kTrain : ForwardMode::kEval;
    const double drop = train ? 0.4 : 0.0;
    const std::uint64_t fseed = 300 + trial;

    ForwardTape tape;
    Matrix z = encoder_forward(p, g.adj, g.x, mode, drop, fseed, &tape);

    SUBCASE("") {}  // keep one body; both losses run below

    // linear functional sum(C . Z)
    Matrix c = random_matrix(z.rows(), z.cols(), 400 + trial);
    EncoderGrads lin = encoder_backward(p, tape, c);
    auto f_lin = [&](const std::vector<Matrix>& w) {
      EncoderParams q;
      q.w1 = w[0];
      q.w2 = w[1];
      return weighted_sum(encoder_forward(q, g.adj, g.x, mode, drop, fseed, nullptr), c);
    };
    CHECK(finite_diff_check(f_lin, {p.w1, p.w2}, {lin.dw1, lin.dw2}) < 1e-4);

    // quadratic 0.5 * ||Z||^2, so dZ depends on the forward value
    EncoderGrads quad = encoder_backward(p, tape, z);
    auto f_quad = [&](const std::vector<Matrix>& w) {
      EncoderParams q;
      q.w1 = w[0];
      q.w2 = w[1];
      Matrix out = encoder_forward(q, g.adj, g.x, mode, drop, fseed, nullptr);
      return 0.5 * frobenius_norm(out) * frobenius_norm(out);
    };
    CHECK(finite_diff_check(f_quad, {p.w1, p.w2}, {quad.dw1, quad.dw2}) < 1e-4);
  }
}

TEST_CASE("projection head gradients, including the pass-through into z") {
  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    EncoderParams p = init_encoder({3, 3, 4, true}, 50 + trial);
    Matrix z = random_matrix(6, 4, 60 + trial);
    ProjectionTape tape;
    Matrix out = projection_forward(p, z, &tape);
    Matrix c = random_matrix(out.rows(), out.cols(), 70 + trial);
    ProjectionGrads g = projection_backward(p, z, tape, c);
    auto f = [&](const std::vector<Matrix>& w) {
      EncoderParams q = p;
      q.wp1 = w[0];
      q.wp2 = w[1];
      return weighted_sum(projection_forward(q, w[2], nullptr), c);
    };
    CHECK(finite_diff_check(f, {p.wp1, p.wp2, z}, {g.dwp1, g.dwp2, g.dz}) < 1e-4);
  }
  EncoderParams no_head = init_encoder({3, 3, 4, false}, 1);
  CHECK_THROWS_AS(projection_forward(no_head, Matrix(2, 4), nullptr), std::invalid_argument);
}

TEST_CASE("cross-entropy: hand values and finite differences") {
  Matrix logits(1, 2);
  auto r = ce_loss(logits, {0});
  CHECK(r.loss == doctest::Approx(std::log(2.0)));
  CHECK(r.dlogits(0, 0) == doctest::Approx(-0.5));
  CHECK(r.dlogits(0, 1) == doctest::Approx(0.5));

  Matrix u(4, 3);  // all-zero logits: uniform softmax
  auto ru = ce_loss(u, {0, 1, 2, 0});
  CHECK(ru.loss == doctest::Approx(std::log(3.0)));

  // max-shift keeps huge logits finite (exp would overflow without it)
  Matrix big = random_matrix(5, 4, 9);
  big *= 500.0;
  std::vector<int> y = {3, 0, 1, 2, 1};
  auto rb = ce_loss(big, y);
  CHECK(std::isfinite(rb.loss));
  for (std::size_t i = 0; i < rb.dlogits.size(); ++i) REQUIRE(std::isfinite(rb.dlogits.data()[i]));

  Matrix mid = random_matrix(5, 4, 9);
  mid *= 2.0;
  auto rm = ce_loss(mid, y);
  auto f = [&](const std::vector<Matrix>& w) { return ce_loss(w[0], y).loss; };
  CHECK(finite_diff_check(f, {mid}, {rm.dlogits}) < 1e-4);

  CHECK_THROWS_AS(ce_loss(logits, {5}), std::invalid_argument);
  CHECK_THROWS_AS(ce_loss(logits, {0, 1}), std::invalid_argument);
}

TEST_CASE("argmax ties resolve to the lowest index") {
  Matrix m(2, 3);
  m(0, 0) = 1.0; m(0, 1) = 1.0; m(0, 2) = 0.0;
  m(1, 0) = -1.0; m(1, 1) = 0.5; m(1, 2) = 0.5;
  auto a = argmax_rows(m);
  CHECK(a[0] == 0);
  CHECK(a[1] == 1);
}

TEST_CASE("adam: first step moves by ~lr in the gradient sign direction") {
  Matrix p(1, 2);
  p(0, 0) = 1.0; p(0, 1) = -2.0;
  Matrix g(1, 2);
  g(0, 0) = 3.0; g(0, 1) = -0.7;
  AdamState st;
  AdamHyper hp;
  hp.lr = 0.001;
  hp.weight_decay = 0.0;
  adam_step({&p}, {&g}, st, hp);
  CHECK(p(0, 0) == doctest::Approx(1.0 - 0.001).epsilon(1e-5));
  CHECK(p(0, 1) == doctest::Approx(-2.0 + 0.001).epsilon(1e-5));

  // scale invariance of the first step
  Matrix p2(1, 1, 0.5), g2a(1, 1, 0.004), g2b(1, 1, 400.0);
  AdamState sa, sb;
  Matrix pa = p2, pb = p2;
  adam_step({&pa}, {&g2a}, sa, hp);
  adam_step({&pb}, {&g2b}, sb, hp);
  CHECK(pa(0, 0) == doctest::Approx(pb(0, 0)).epsilon(1e-6));
}

TEST_CASE("adam: coupled weight decay pulls parameters toward zero") {
  Matrix p(1, 1, 2.0);
  Matrix g(1, 1, 0.0);
  AdamState st;
  AdamHyper hp;
  hp.lr = 0.01;
  hp.weight_decay = 0.1;
  adam_step({&p}, {&g}, st, hp);
  // effective gradient wd*p > 0, so the step is ~ -lr
  CHECK(p(0, 0) == doctest::Approx(2.0 - 0.01).epsilon(1e-4));

  AdamState other;
  Matrix q(2, 2);
  CHECK_THROWS_AS(adam_step({&p, &q}, {&g}, other, hp), std::invalid_argument);
}

TEST_CASE("adam: repeated steps descend a quadratic") {
  Matrix p(1, 1, 3.0);
  AdamState st;
  AdamHyper hp;
  hp.lr = 0.05;
  hp.weight_decay = 0.0;
  for (int i = 0; i < 400; ++i) {
    Matrix g(1, 1, 2.0 * p(0, 0));  // d/dp of p^2
    adam_step({&p}, {&g}, st, hp);
  }
  CHECK(std::fabs(p(0, 0)) < 0.05);
}

TEST_CASE("finite_diff_check calibrates: exact gradient tiny, wrong gradient large") {
  Matrix x = random_matrix(3, 3, 21);
  auto f = [](const std::vector<Matrix>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w[0].size(); ++i) s += w[0].data()[i] * w[0].data()[i];
    return s;
  };
  Matrix grad = x;
  grad *= 2.0;
  CHECK(finite_diff_check(f, {x}, {grad}) < 1e-9);
  Matrix wrong = x;
  wrong *= 4.0;  // doubled gradient
  CHECK(finite_diff_check(f, {x}, {wrong}) > 0.4);
}

TEST_CASE("checkpoints round trip bit-exactly and validate on load") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "fsnc_nn_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);

  for (bool proj : {false, true}) {
    EncoderParams p = init_encoder({9, 5, 4, proj}, 123);
    const std::string path = (dir / (proj ? "p.fsnp" : "e.fsnp")).string();
    save_checkpoint(path, p);
    EncoderParams r = load_checkpoint(path);
    CHECK(max_abs_diff(p.w1, r.w1) == 0.0);
    CHECK(max_abs_diff(p.w2, r.w2) == 0.0);
    CHECK(r.has_projection() == proj);
    if (proj) {
      CHECK(max_abs_diff(p.wp1, r.wp1) == 0.0);
      CHECK(max_abs_diff(p.wp2, r.wp2) == 0.0);
    }
  }

  // corruption is rejected with the path in the message
  const std::string garbled = (dir / "bad.fsnp").string();
  atomic_write_file(garbled, "FSNPxxxx");
  CHECK_THROWS_WITH_AS(load_checkpoint(garbled), doctest::Contains("bad.fsnp"),
                       std::invalid_argument);
}
