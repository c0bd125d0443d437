#include "fsnc/graph.hpp"

#include "fsnc/io.hpp"
#include "fsnc/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

namespace fsnc {

namespace {

using nlohmann::json;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_lines(const std::string& text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line = trim(std::string_view(text).substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

template <typename T>
T parse_number(std::string_view token, const std::string& context) {
  token = trim(token);
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail(context + ": cannot parse '" + std::string(token) + "'");
  return value;
}

double parse_real(std::string_view token, const std::string& context) {
  token = trim(token);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail(context + ": cannot parse '" + std::string(token) + "'");
  return value;
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& bytes, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
  return v;
}

}  // namespace

int GraphBundle::num_classes() const {
  int c = -1;
  for (int l : labels) c = std::max(c, l);
  return c + 1;
}

std::vector<std::vector<std::size_t>> GraphBundle::nodes_by_class() const {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  return by_class;
}

void validate_bundle(const GraphBundle& g) {
  const std::size_t n = g.num_nodes();
  if (g.labels.size() != n) fail("bundle: row-count mismatch between features and labels");
  for (int l : g.labels)
    if (l < 0) fail("bundle: negative class label");
  const int c = g.num_classes();
  if (n > 0 && c == 0) fail("bundle: no labels");
  std::vector<std::size_t> per_class(static_cast<std::size_t>(c), 0);
  for (int l : g.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int k = 0; k < c; ++k)
    if (per_class[static_cast<std::size_t>(k)] == 0)
      fail("bundle: class ids are not dense, class " + std::to_string(k) + " is empty");
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& [lo, hi] = g.edges[i];
    if (lo >= hi) fail("bundle: edge not in canonical (lo < hi) form");
    if (hi >= n) fail("bundle: edge endpoint out of range");
    if (i > 0 && !(g.edges[i - 1] < g.edges[i])) fail("bundle: edges not sorted/unique");
  }
}

LabelSplit split_label_space(const GraphBundle& g, const LabelSplit& assignment) {
  const int c = g.num_classes();
  LabelSplit out = assignment;
  for (auto* pool : {&out.train_classes, &out.dev_classes, &out.test_classes})
    std::sort(pool->begin(), pool->end());
  const char* names[3] = {"train", "dev", "test"};
  const std::vector<int>* pools[3] = {&out.train_classes, &out.dev_classes, &out.test_classes};
  std::vector<int> owner(static_cast<std::size_t>(c), -1);
  for (int p = 0; p < 3; ++p) {
    if (pools[p]->empty()) fail(std::string("split: ") + names[p] + " class pool is empty");
    for (std::size_t i = 0; i < pools[p]->size(); ++i) {
      const int cls = (*pools[p])[i];
      if (cls < 0 || cls >= c)
        fail("split: class " + std::to_string(cls) + " does not exist in the graph");
      if (i > 0 && (*pools[p])[i - 1] == cls)
        fail("split: class " + std::to_string(cls) + " listed twice in " + names[p]);
      if (owner[static_cast<std::size_t>(cls)] >= 0)
        fail("split: class " + std::to_string(cls) + " assigned to both " +
             names[owner[static_cast<std::size_t>(cls)]] + " and " + names[p]);
      owner[static_cast<std::size_t>(cls)] = p;
    }
  }
  for (int cls = 0; cls < c; ++cls)
    if (owner[static_cast<std::size_t>(cls)] < 0)
      fail("split: class " + std::to_string(cls) + " is not assigned to any pool");
  return out;
}

NormalizedAdjacency normalize_adjacency(const GraphBundle& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<std::size_t>> nbr(n);
  for (const auto& [lo, hi] : g.edges) {
    nbr[lo].push_back(hi);
    nbr[hi].push_back(lo);
  }
  NormalizedAdjacency a;
  a.n = n;
  a.row_ptr.assign(n + 1, 0);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i)
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(nbr[i].size() + 1));
  a.col.reserve(2 * g.edges.size() + n);
  a.val.reserve(2 * g.edges.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = nbr[i];
    row.push_back(i);  // self-loop
    std::sort(row.begin(), row.end());
    for (std::size_t j : row) {
      a.col.push_back(j);
      a.val.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    a.row_ptr[i + 1] = a.col.size();
  }
  return a;
}

Matrix spmm(const NormalizedAdjacency& a, const Matrix& x) {
  if (x.rows() != a.n) fail("spmm: row-count mismatch");
  Matrix out(a.n, x.cols());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < a.n; ++i) {
    double* oi = out.row(i);
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const double v = a.val[p];
      const double* xr = x.row(a.col[p]);
      for (std::size_t j = 0; j < d; ++j) oi[j] += v * xr[j];
    }
  }
  return out;
}

GraphBundle generate_sbm(const SbmSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) fail("sbm: need at least 2 classes");
  if (spec.nodes_per_class < 1) fail("sbm: nodes_per_class must be positive");
  if (spec.feature_dim < spec.num_classes)
    fail("sbm: feature_dim must be at least num_classes (one axis per class mean)");
  if (spec.p_in < 0 || spec.p_in > 1 || spec.p_out < 0 || spec.p_out > 1)
    fail("sbm: edge probabilities must be in [0,1]");
  if (spec.noise_std <= 0) fail("sbm: noise_std must be positive");

  const std::size_t n = spec.num_classes * spec.nodes_per_class;
  GraphBundle g;
  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.labels[i] = static_cast<int>(i / spec.nodes_per_class);

  Rng edge_rng(derive_seed(seed, {seed_ns::kSbm, 0}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = (g.labels[i] == g.labels[j]) ? spec.p_in : spec.p_out;
      if (edge_rng.flip(p)) g.edges.emplace_back(i, j);
    }

  // Orthogonal class means scaled so every pair sits exactly
  // class_mean_separation * noise_std apart.
  const double axis = spec.class_mean_separation * spec.noise_std / std::sqrt(2.0);
  Rng feat_rng(derive_seed(seed, {seed_ns::kSbm, 1}));
  g.features = Matrix(n, spec.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = g.features.row(i);
    for (std::size_t j = 0; j < spec.feature_dim; ++j)
      row[j] = spec.noise_std * feat_rng.normal();
    row[static_cast<std::size_t>(g.labels[i])] += axis;
  }
  validate_bundle(g);
  return g;
}

// --- bundle directory I/O ----------------------------------------------------

namespace {

std::vector<std::pair<std::size_t, std::size_t>> parse_edges(const std::string& text,
                                                             std::size_t n) {
  auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "src,dst")
    fail("edges.csv: expected header 'src,dst'");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(lines.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) fail("edges.csv: malformed row '" + std::string(line) + "'");
    const auto src = parse_number<std::size_t>(line.substr(0, comma), "edges.csv");
    const auto dst = parse_number<std::size_t>(line.substr(comma + 1), "edges.csv");
    if (src == dst) fail("edges.csv: self-loop on node " + std::to_string(src));
    if (src >= n || dst >= n)
      fail("edges.csv: endpoint out of range in row '" + std::string(line) + "'");
    edges.emplace_back(std::min(src, dst), std::max(src, dst));
  }
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] == edges[i - 1])
      fail("edges.csv: duplicate edge " + std::to_string(edges[i].first) + "," +
           std::to_string(edges[i].second));
  return edges;
}

Matrix parse_features_csv(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty()) fail("features.csv: empty file");
  std::vector<std::vector<double>> rows;
  rows.reserve(lines.size());
  for (auto line : lines) {
    std::vector<double> row;
    std::size_t start = 0;
    const std::string_view sv = line;
    while (start <= sv.size()) {
      std::size_t end = sv.find(',', start);
      if (end == std::string_view::npos) end = sv.size();
      row.push_back(parse_real(sv.substr(start, end - start), "features.csv"));
      if (end == sv.size()) break;
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail("features.csv: ragged rows");
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

std::vector<int> parse_labels(const std::string& text) {
  auto lines = split_lines(text);
  std::vector<int> labels;
  labels.reserve(lines.size());
  for (auto line : lines) labels.push_back(parse_number<int>(line, "labels.csv"));
  return labels;
}

}  // namespace

void write_fsnb(const std::string& path, const Matrix& m) {
  std::string bytes;
  bytes.reserve(16 + 4 * m.size());
  bytes += "FSNB";
  append_u32(bytes, 1);  // format version
  append_u32(bytes, static_cast<std::uint32_t>(m.rows()));
  append_u32(bytes, static_cast<std::uint32_t>(m.cols()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float f = static_cast<float>(m.data()[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    append_u32(bytes, u);
  }
  atomic_write_file(path, bytes);
}

Matrix read_fsnb(const std::string& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < 16 || bytes.compare(0, 4, "FSNB") != 0)
    fail(path + ": not an FSNB file");
  const std::uint32_t version = read_u32(bytes, 4);
  if (version != 1) fail(path + ": unsupported FSNB version " + std::to_string(version));
  const std::size_t n = read_u32(bytes, 8);
  const std::size_t d = read_u32(bytes, 12);
  if (bytes.size() != 16 + 4 * n * d) fail(path + ": truncated FSNB payload");
  Matrix m(n, d);
  for (std::size_t i = 0; i < n * d; ++i) {
    const std::uint32_t u = read_u32(bytes, 16 + 4 * i);
    float f;
    std::memcpy(&f, &u, 4);
    m.data()[i] = static_cast<double>(f);
  }
  return m;
}

GraphBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail("bundle directory not found: " + dir);
  GraphBundle g;
  const std::string bin = dir + "/features.bin";
  const std::string csv = dir + "/features.csv";
  if (fs::exists(bin))
    g.features = read_fsnb(bin);
  else if (fs::exists(csv))
    g.features = parse_features_csv(read_text_file(csv));
  else
    fail(dir + ": missing features.bin/features.csv");
  g.labels = parse_labels(read_text_file(dir + "/labels.csv"));
  if (g.labels.size() != g.num_nodes())
    fail(dir + ": row-count mismatch between features and labels");
  g.edges = parse_edges(read_text_file(dir + "/edges.csv"), g.num_nodes());
  validate_bundle(g);
  return g;
}

LabelSplit load_split_assignment(const std::string& dir) {
  const std::string path = dir + "/splits.json";
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(path + ": " + e.what());
  }
  LabelSplit s;
  for (auto [key, dst] : {std::pair{"train", &s.train_classes}, {"dev", &s.dev_classes},
                          {"test", &s.test_classes}}) {
    if (!j.contains(key) || !j[key].is_array())
      fail(path + ": missing or non-array key '" + std::string(key) + "'");
    for (const auto& v : j[key]) {
      if (!v.is_number_integer()) fail(path + ": non-integer class id under '" + key + "'");
      dst->push_back(v.get<int>());
    }
  }
  return s;
}

void save_bundle(const std::string& dir, const GraphBundle& g, const LabelSplit& split,
                 bool binary_features) {
  validate_bundle(g);
  std::filesystem::create_directories(dir);

  std::string edges = "src,dst\n";
  for (const auto& [lo, hi] : g.edges)
    edges += std::to_string(lo) + "," + std::to_string(hi) + "\n";
  atomic_write_file(dir + "/edges.csv", edges);

  std::string labels;
  for (int l : g.labels) labels += std::to_string(l) + "\n";
  atomic_write_file(dir + "/labels.csv", labels);

  if (binary_features) {
    write_fsnb(dir + "/features.bin", g.features);
  } else {
    std::string feats;
    char buf[64];
    for (std::size_t i = 0; i < g.features.rows(); ++i) {
      for (std::size_t j = 0; j < g.features.cols(); ++j) {
        const int len = std::snprintf(buf, sizeof buf, "%.9g", g.features(i, j));
        if (j) feats += ',';
        feats.append(buf, static_cast<std::size_t>(len));
      }
      feats += '\n';
    }
    atomic_write_file(dir + "/features.csv", feats);
  }

  json j;
  j["train"] = split.train_classes;
  j["dev"] = split.dev_classes;
  j["test"] = split.test_classes;
  atomic_write_file(dir + "/splits.json", j.dump(2) + "\n");
}

}  // namespace fsnc
