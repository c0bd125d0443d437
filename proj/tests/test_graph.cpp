#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fsnc/graph.hpp"
#include "fsnc/io.hpp"
#include "fsnc/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace fsnc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("fsnc_graph_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

GraphBundle tiny_bundle() {
  GraphBundle g;
  g.features = Matrix(3, 2);
  g.features(0, 0) = 1.0; g.features(1, 1) = 2.0; g.features(2, 0) = -0.5;
  g.labels = {0, 1, 0};
  g.edges = {{0, 1}, {1, 2}};  // path 0 - 1 - 2
  return g;
}

Matrix dense_adjacency(const NormalizedAdjacency& a) {
  Matrix d(a.n, a.n);
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) d(i, a.col[p]) = a.val[p];
  return d;
}

}  // namespace

TEST_CASE("path-graph normalization matches D~^{-1/2}(A+I)D~^{-1/2} by hand") {
  // degrees-with-self-loop: node 0 -> 2, node 1 -> 3, node 2 -> 2
  auto a = normalize_adjacency(tiny_bundle());
  Matrix d = dense_adjacency(a);
  CHECK(d(0, 0) == doctest::Approx(0.5));
  CHECK(d(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(d(2, 2) == doctest::Approx(0.5));
  CHECK(d(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(d(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(d(0, 2) == doctest::Approx(0.0));
  // symmetry and entry count 2m + n
  CHECK(d(1, 0) == doctest::Approx(d(0, 1)));
  CHECK(a.val.size() == 2 * 2 + 3);
  // CSR columns ascend within each row
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t p = a.row_ptr[i] + 1; p < a.row_ptr[i + 1]; ++p)
      CHECK(a.col[p - 1] < a.col[p]);
}

TEST_CASE("isolated node gets exactly its self-loop with weight 1") {
  GraphBundle g = tiny_bundle();
  g.features = Matrix(4, 2);
  g.labels = {0, 1, 0, 1};
  auto a = normalize_adjacency(g);
  Matrix d = dense_adjacency(a);
  CHECK(d(3, 3) == doctest::Approx(1.0));
  for (std::size_t j = 0; j < 3; ++j) CHECK(d(3, j) == 0.0);
}

TEST_CASE("spmm agrees with the dense product on a random SBM graph") {
  SbmSpec spec;
  spec.num_classes = 3;
  spec.nodes_per_class = 15;
  spec.p_in = 0.3;
  spec.p_out = 0.05;
  spec.feature_dim = 5;
  GraphBundle g = generate_sbm(spec, 77);
  auto a = normalize_adjacency(g);
  Matrix dense = dense_adjacency(a);
  Matrix want = matmul(dense, g.features);
  Matrix got = spmm(a, g.features);
  CHECK(max_abs_diff(want, got) < 1e-12);
}

TEST_CASE("split_label_space validates and sorts") {
  GraphBundle g = tiny_bundle();
  g.labels = {0, 1, 2};  // three singleton classes

  LabelSplit ok = split_label_space(g, {{2}, {0}, {1}});
  CHECK(ok.train_classes == std::vector<int>{2});

  CHECK_THROWS_WITH_AS(split_label_space(g, {{0, 1}, {1}, {2}}),
                       doctest::Contains("class 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(split_label_space(g, {{0}, {1}, {}}),
                       doctest::Contains("test"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(split_label_space(g, {{0}, {1}, {5}}),
                       doctest::Contains("class 5"), std::invalid_argument);
  // class 2 unassigned
  GraphBundle g4 = g;
  g4.features = Matrix(4, 2);
  g4.labels = {0, 1, 2, 3};
  CHECK_THROWS_WITH_AS(split_label_space(g4, {{0}, {1}, {3}}),
                       doctest::Contains("class 2"), std::invalid_argument);
}

TEST_CASE("bundle save/load round trip, binary and csv features") {
  GraphBundle g = tiny_bundle();
  LabelSplit split{{0}, {1}, {0}};  // content is persisted as-is; validation happens later
  for (bool binary : {true, false}) {
    auto dir = fresh_dir(binary ? "rt_bin" : "rt_csv");
    save_bundle(dir.string(), g, split, binary);
    GraphBundle r = load_bundle(dir.string());
    CHECK(r.num_nodes() == 3);
    CHECK(r.edges == g.edges);
    CHECK(r.labels == g.labels);
    CHECK(max_abs_diff(r.features, g.features) < 1e-6);
    LabelSplit s = load_split_assignment(dir.string());
    CHECK(s.train_classes == split.train_classes);
    CHECK(s.test_classes == split.test_classes);
  }
}

TEST_CASE("edge list rejects header, loop, duplicate and range violations") {
  auto dir = fresh_dir("edges");
  write_text(dir / "features.csv", "1.0,0.0\n0.0,1.0\n1.0,1.0\n");
  write_text(dir / "labels.csv", "0\n1\n0\n");

  write_text(dir / "edges.csv", "0,1\n1,2\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("header"),
                       std::invalid_argument);

  write_text(dir / "edges.csv", "src,dst\n1,1\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("self-loop"),
                       std::invalid_argument);

  // same undirected edge in both orientations counts as a duplicate
  write_text(dir / "edges.csv", "src,dst\n0,1\n1,0\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("duplicate"),
                       std::invalid_argument);

  write_text(dir / "edges.csv", "src,dst\n0,7\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("out of range"),
                       std::invalid_argument);

  write_text(dir / "edges.csv", "src,dst\n0,x\n");
  CHECK_THROWS_AS(load_bundle(dir.string()), std::invalid_argument);
}

TEST_CASE("feature/label consistency errors") {
  auto dir = fresh_dir("feat");
  write_text(dir / "edges.csv", "src,dst\n0,1\n");
  write_text(dir / "features.csv", "1.0,2.0\n3.0\n");
  write_text(dir / "labels.csv", "0\n1\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("ragged"),
                       std::invalid_argument);

  write_text(dir / "features.csv", "1.0,2.0\n3.0,4.0\n");
  write_text(dir / "labels.csv", "0\n1\n0\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("mismatch"),
                       std::invalid_argument);

  // labels must be dense: class 1 missing
  write_text(dir / "labels.csv", "0\n2\n");
  CHECK_THROWS_WITH_AS(load_bundle(dir.string()), doctest::Contains("dense"),
                       std::invalid_argument);

  CHECK_THROWS_AS(load_bundle((dir / "nope").string()), std::invalid_argument);
}

TEST_CASE("FSNB container round trips and rejects corruption") {
  auto dir = fresh_dir("fsnb");
  Matrix m(2, 3);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = 0.25 * static_cast<double>(i) - 0.5;
  const std::string path = (dir / "m.bin").string();
  write_fsnb(path, m);
  Matrix r = read_fsnb(path);
  REQUIRE(r.rows() == 2);
  REQUIRE(r.cols() == 3);
  CHECK(max_abs_diff(m, r) < 1e-7);

  write_text(dir / "bad.bin", "NOPE");
  CHECK_THROWS_AS(read_fsnb((dir / "bad.bin").string()), std::invalid_argument);
  std::string truncated = read_text_file(path);
  truncated.resize(truncated.size() - 4);
  atomic_write_file((dir / "trunc.bin").string(), truncated);
  CHECK_THROWS_WITH_AS(read_fsnb((dir / "trunc.bin").string()), doctest::Contains("truncated"),
                       std::invalid_argument);
}

TEST_CASE("SBM generator: structure, determinism, separation") {
  SbmSpec spec;
  spec.num_classes = 4;
  spec.nodes_per_class = 40;
  spec.p_in = 0.25;
  spec.p_out = 0.02;
  spec.feature_dim = 8;
  spec.class_mean_separation = 3.0;
  spec.noise_std = 0.5;

  GraphBundle g1 = generate_sbm(spec, 2024);
  GraphBundle g2 = generate_sbm(spec, 2024);
  GraphBundle g3 = generate_sbm(spec, 2025);
  CHECK(g1.edges == g2.edges);
  CHECK(max_abs_diff(g1.features, g2.features) == 0.0);
  CHECK(g1.edges != g3.edges);

  CHECK(g1.num_nodes() == 160);
  CHECK(g1.labels[0] == 0);
  CHECK(g1.labels[159] == 3);

  // empirical densities land near p_in / p_out
  std::size_t in_edges = 0, out_edges = 0;
  for (const auto& [lo, hi] : g1.edges)
    (g1.labels[lo] == g1.labels[hi] ? in_edges : out_edges)++;
  const double in_pairs = 4 * 40.0 * 39.0 / 2.0;
  const double out_pairs = 160.0 * 159.0 / 2.0 - in_pairs;
  CHECK(in_edges / in_pairs == doctest::Approx(0.25).epsilon(0.15));
  CHECK(out_edges / out_pairs == doctest::Approx(0.02).epsilon(0.25));

  // class means are ~separation * noise_std apart
  Matrix means(4, 8);
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t i = 0; i < g1.num_nodes(); ++i) {
    const auto c = static_cast<std::size_t>(g1.labels[i]);
    for (std::size_t j = 0; j < 8; ++j) means(c, j) += g1.features(i, j);
    counts[c]++;
  }
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < 8; ++j) means(c, j) /= static_cast<double>(counts[c]);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      double d2 = 0;
      for (std::size_t j = 0; j < 8; ++j) {
        const double d = means(a, j) - means(b, j);
        d2 += d * d;
      }
      CHECK(std::sqrt(d2) == doctest::Approx(3.0 * 0.5).epsilon(0.15));
    }

  SbmSpec bad = spec;
  bad.feature_dim = 2;
  CHECK_THROWS_AS(generate_sbm(bad, 1), std::invalid_argument);
}
