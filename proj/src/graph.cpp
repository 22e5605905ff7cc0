// Copyright 2026 The CIT Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cit/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>

#include "cit/errors.hpp"
#include "cit/rng.hpp"

namespace cit {
namespace {

// Partial Fisher-Yates: the first k entries become a uniform sample.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k && i + 1 < items.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_blank_or_comment(const std::string& line) {
  auto it = std::find_if(line.begin(), line.end(), [](unsigned char c) { return !std::isspace(c); });
  return it == line.end() || *it == '#';
}

template <typename T>
T parse_number(const std::string& tok, const std::string& source, std::size_t line) {
  T value{};
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && tok[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ParseError(source, line, "cannot parse '" + tok + "'");
  return value;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void Graph::validate() const {
  const std::size_t n = num_nodes();
  if (adjacency.rows() != n || adjacency.cols() != n)
    throw ValidationError("graph: adjacency " + adjacency.shape().str() + " for " +
                          std::to_string(n) + " nodes");
  if (features.rows() != n)
    throw ValidationError("graph: " + std::to_string(features.rows()) + " feature rows for " +
                          std::to_string(n) + " nodes");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw ValidationError("graph: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
  if (!adjacency.is_symmetric()) throw ValidationError("graph: adjacency is not symmetric");
  for (std::size_t r = 0; r < n; ++r) {
    if (adjacency.contains(r, r)) throw ValidationError("graph: self-loop at node " + std::to_string(r));
  }
  for (double v : adjacency.values())
    if (v != 1.0) throw ValidationError("graph: adjacency is not binary");
  const Mask* masks[] = {&split.train, &split.val, &split.test};
  for (const Mask* m : masks)
    if (!m->empty() && m->size() != n) throw ValidationError("graph: mask length mismatch");
  if (split.train.size() == n && split.val.size() == n && split.test.size() == n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (int(split.train[i]) + int(split.val[i]) + int(split.test[i]) > 1)
        throw ValidationError("graph: node " + std::to_string(i) + " is in more than one split");
    }
  }
}

std::vector<std::size_t> mask_indices(const Mask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

NormalizedAdjacency normalize_adjacency(const SparseMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw ValidationError("normalize_adjacency: matrix is not square");
  if (!adjacency.is_symmetric()) throw ValidationError("normalize_adjacency: adjacency is not symmetric");
  for (double v : adjacency.values())
    if (v != 1.0) throw ValidationError("normalize_adjacency: adjacency is not binary");

  std::vector<Triplet> tilde;
  tilde.reserve(adjacency.nnz() + n);
  std::vector<double> degrees(n, 1.0);
  const auto offsets = adjacency.row_offsets();
  const auto cols = adjacency.col_indices();
  for (std::size_t r = 0; r < n; ++r) {
    tilde.push_back({r, r, 1.0});
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      if (cols[k] == r) throw ValidationError("normalize_adjacency: nonzero diagonal at node " + std::to_string(r));
      tilde.push_back({r, cols[k], 1.0});
      degrees[r] += 1.0;
    }
  }
  auto a_tilde = SparseMatrix::from_triplets(n, n, tilde);

  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degrees[i]);
  std::vector<double> vals(a_tilde.values().begin(), a_tilde.values().end());
  const auto t_off = a_tilde.row_offsets();
  const auto t_col = a_tilde.col_indices();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = t_off[r]; k < t_off[r + 1]; ++k) {
      // Same expression for (r, c) and (c, r) keeps the result exactly symmetric.
      const std::size_t c = t_col[k];
      const std::size_t lo = std::min(r, c), hi = std::max(r, c);
      vals[k] = inv_sqrt[lo] * inv_sqrt[hi];
    }
  }
  NormalizedAdjacency out;
  out.matrix = std::make_shared<const SparseMatrix>(
      n, n, std::vector<std::size_t>(t_off.begin(), t_off.end()),
      std::vector<std::size_t>(t_col.begin(), t_col.end()), std::move(vals));
  out.adjacency_tilde = std::make_shared<const SparseMatrix>(std::move(a_tilde));
  out.degree_matrix = std::make_shared<const SparseMatrix>(SparseMatrix::diagonal(degrees));
  out.degrees = std::move(degrees);
  return out;
}

SparseMatrix adjacency_from_edges(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<Triplet> t;
  t.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n)
      throw ValidationError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") references a node outside [0, " + std::to_string(n) + ")");
    if (a == b) throw ValidationError("self-loop at node " + std::to_string(a));
    t.push_back({a, b, 1.0});
    t.push_back({b, a, 1.0});
  }
  auto summed = SparseMatrix::from_triplets(n, n, std::move(t));
  std::vector<double> ones(summed.nnz(), 1.0);
  return SparseMatrix(n, n,
                      std::vector<std::size_t>(summed.row_offsets().begin(), summed.row_offsets().end()),
                      std::vector<std::size_t>(summed.col_indices().begin(), summed.col_indices().end()),
                      std::move(ones));
}

std::vector<std::pair<std::size_t, std::size_t>> edge_list(const SparseMatrix& adjacency) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto offsets = adjacency.row_offsets();
  const auto cols = adjacency.col_indices();
  for (std::size_t r = 0; r < adjacency.rows(); ++r)
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k)
      if (cols[k] > r) out.emplace_back(r, cols[k]);
  return out;
}

void SbmSpec::validate() const {
  const std::size_t b = block_sizes.size();
  if (b == 0) throw ValidationError("sbm: no blocks");
  if (edge_prob.size() != b) throw ValidationError("sbm: edge_prob must be blocks x blocks");
  for (std::size_t i = 0; i < b; ++i) {
    if (edge_prob[i].size() != b) throw ValidationError("sbm: edge_prob must be blocks x blocks");
    for (std::size_t j = 0; j < b; ++j) {
      const double p = edge_prob[i][j];
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("sbm: edge probability outside [0, 1]");
      if (p != edge_prob[j][i]) throw ValidationError("sbm: edge_prob is not symmetric");
    }
  }
  if (class_means.rows() != b || class_means.cols() != feature_dim)
    throw ValidationError("sbm: class_means must be " + Shape{b, feature_dim}.str() + ", got " +
                          class_means.shape().str());
  if (!(class_std >= 0.0)) throw ValidationError("sbm: class_std must be nonnegative");
}

DenseMatrix make_class_means(std::size_t classes, std::size_t dim, double separation,
                             std::uint64_t seed) {
  Rng rng = make_rng(seed, "class-means");
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix means(classes, dim);
  for (double& v : means.data()) v = separation * normal(rng);
  return means;
}

SparseMatrix sbm_edges(const std::vector<std::size_t>& block_sizes,
                       const std::vector<std::vector<double>>& edge_prob, std::uint64_t seed) {
  std::vector<std::size_t> block_of;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) block_of.insert(block_of.end(), block_sizes[b], b);
  const std::size_t n = block_of.size();
  Rng rng = make_rng(seed, "sbm-edges");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = edge_prob[block_of[i]][block_of[j]];
      if (unit(rng) < p) edges.emplace_back(i, j);
    }
  }
  return adjacency_from_edges(n, edges);
}

Graph sbm_generate(const SbmSpec& spec) {
  spec.validate();
  Graph g;
  for (std::size_t b = 0; b < spec.block_sizes.size(); ++b)
    g.labels.insert(g.labels.end(), spec.block_sizes[b], static_cast<int>(b));
  g.num_classes = static_cast<int>(spec.block_sizes.size());
  const std::size_t n = g.labels.size();

  g.adjacency = sbm_edges(spec.block_sizes, spec.edge_prob, spec.seed);

  Rng rng = make_rng(spec.seed, "sbm-features");
  std::normal_distribution<double> normal(0.0, 1.0);
  g.features = DenseMatrix(n, spec.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto mean = spec.class_means.row(static_cast<std::size_t>(g.labels[i]));
    auto row = g.features.row(i);
    for (std::size_t c = 0; c < spec.feature_dim; ++c) row[c] = mean[c] + spec.class_std * normal(rng);
  }
  return g;
}

Graph with_adjacency(const Graph& g, SparseMatrix adjacency) {
  Graph out = g;
  out.adjacency = std::move(adjacency);
  return out;
}

Graph perturb_add_edges(const Graph& g, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0)) throw ValidationError("perturb_add_edges: ratio must be >= 0");
  const std::size_t n = g.num_nodes();
  auto edges = edge_list(g.adjacency);
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(edges.size())));
  if (count == 0) return g;
  const std::size_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::size_t available = pairs - edges.size();
  if (count > available)
    throw ValidationError("perturb_add_edges: " + std::to_string(count) + " additions requested but only " +
                          std::to_string(available) + " non-edges exist");

  Rng rng = make_rng(seed, "perturb-add");
  if (2 * count > available) {
    // Dense request: enumerate the complement and sample from it directly.
    std::vector<std::pair<std::size_t, std::size_t>> non_edges;
    non_edges.reserve(available);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!g.adjacency.contains(i, j)) non_edges.emplace_back(i, j);
    partial_shuffle(non_edges, count, rng);
    edges.insert(edges.end(), non_edges.begin(), non_edges.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    std::unordered_set<std::uint64_t> seen;
    for (auto [a, b] : edges) seen.insert(static_cast<std::uint64_t>(a) * n + b);
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    std::size_t added = 0;
    while (added < count) {
      std::size_t a = node(rng), b = node(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (!seen.insert(static_cast<std::uint64_t>(a) * n + b).second) continue;
      edges.emplace_back(a, b);
      ++added;
    }
  }
  return with_adjacency(g, adjacency_from_edges(n, edges));
}

Graph perturb_delete_edges(const Graph& g, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("perturb_delete_edges: ratio must lie in [0, 1]");
  auto edges = edge_list(g.adjacency);
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(edges.size())));
  if (count == 0) return g;
  Rng rng = make_rng(seed, "perturb-delete");
  partial_shuffle(edges, count, rng);
  edges.erase(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(count));
  return with_adjacency(g, adjacency_from_edges(g.num_nodes(), edges));
}

Split split_nodes(const Graph& g, std::size_t train_per_class, std::size_t val_count,
                  std::uint64_t seed) {
  const std::size_t n = g.num_nodes();
  Rng rng = make_rng(seed, "split");
  Split s{Mask(n, false), Mask(n, false), Mask(n, false)};
  std::vector<std::size_t> rest;
  for (int c = 0; c < g.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (g.labels[i] == c) members.push_back(i);
    if (members.size() < train_per_class)
      throw ValidationError("split_nodes: class " + std::to_string(c) + " has " +
                            std::to_string(members.size()) + " members, " +
                            std::to_string(train_per_class) + " requested");
    partial_shuffle(members, train_per_class, rng);
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k < train_per_class)
        s.train[members[k]] = true;
      else
        rest.push_back(members[k]);
    }
  }
  std::sort(rest.begin(), rest.end());
  if (val_count > rest.size())
    throw ValidationError("split_nodes: " + std::to_string(val_count) + " validation nodes requested, " +
                          std::to_string(rest.size()) + " available");
  partial_shuffle(rest, val_count, rng);
  for (std::size_t k = 0; k < rest.size(); ++k) (k < val_count ? s.val : s.test)[rest[k]] = true;
  return s;
}

Graph load_graph(const GraphFiles& files) {
  Graph g;
  const std::string label_src = files.labels.string();
  const auto label_lines = read_lines(files.labels);
  int max_label = -1;
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    auto toks = tokenize(label_lines[i]);
    if (toks.empty()) continue;
    if (toks.size() != 1) throw ParseError(label_src, i + 1, "expected one class id");
    const int y = parse_number<int>(toks[0], label_src, i + 1);
    if (y < 0) throw ParseError(label_src, i + 1, "label " + std::to_string(y) + " out of range");
    g.labels.push_back(y);
    max_label = std::max(max_label, y);
  }
  g.num_classes = max_label + 1;
  const std::size_t n = g.labels.size();

  const std::string feat_src = files.features.string();
  const auto feat_lines = read_lines(files.features);
  std::vector<double> values;
  std::size_t rows = 0, dim = 0;
  for (std::size_t i = 0; i < feat_lines.size(); ++i) {
    auto toks = tokenize(feat_lines[i]);
    if (toks.empty()) continue;
    if (rows == 0) dim = toks.size();
    if (toks.size() != dim)
      throw ParseError(feat_src, i + 1, "expected " + std::to_string(dim) + " values, got " +
                                            std::to_string(toks.size()));
    for (const auto& t : toks) values.push_back(parse_number<double>(t, feat_src, i + 1));
    ++rows;
  }
  if (rows != n)
    throw ParseError(feat_src, feat_lines.size(), "feature file has " + std::to_string(rows) +
                                                      " rows but the label file defines " +
                                                      std::to_string(n) + " nodes");
  g.features = DenseMatrix(n, dim, std::move(values));
  if (!g.features.all_finite()) throw ValidationError(feat_src + ": non-finite feature value");

  const std::string edge_src = files.edges.string();
  const auto edge_lines = read_lines(files.edges);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    if (is_blank_or_comment(edge_lines[i])) continue;
    auto toks = tokenize(edge_lines[i]);
    if (toks.size() != 2) throw ParseError(edge_src, i + 1, "expected 'src dst'");
    const auto a = parse_number<std::size_t>(toks[0], edge_src, i + 1);
    const auto b = parse_number<std::size_t>(toks[1], edge_src, i + 1);
    if (a >= n || b >= n)
      throw ParseError(edge_src, i + 1, "node id out of range (" + std::to_string(n) + " nodes)");
    if (a == b) throw ParseError(edge_src, i + 1, "self-loop at node " + std::to_string(a));
    edges.emplace_back(a, b);
  }
  g.adjacency = adjacency_from_edges(n, edges);

  if (files.split) {
    const std::string split_src = files.split->string();
    const auto split_lines = read_lines(*files.split);
    g.split = Split{Mask(n, false), Mask(n, false), Mask(n, false)};
    std::size_t node = 0;
    for (std::size_t i = 0; i < split_lines.size(); ++i) {
      auto toks = tokenize(split_lines[i]);
      if (toks.empty()) continue;
      if (toks.size() != 1 || node >= n) throw ParseError(split_src, i + 1, "unexpected split entry");
      const auto& t = toks[0];
      if (t == "train") g.split.train[node] = true;
      else if (t == "val") g.split.val[node] = true;
      else if (t == "test") g.split.test[node] = true;
      else if (t != "none") throw ParseError(split_src, i + 1, "unknown split token '" + t + "'");
      ++node;
    }
    if (node != n)
      throw ParseError(split_src, split_lines.size(), "split file has " + std::to_string(node) +
                                                          " entries for " + std::to_string(n) + " nodes");
  }
  g.validate();
  return g;
}

void save_graph(const Graph& g, const GraphFiles& files) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw ValidationError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(files.edges);
    for (auto [a, b] : edge_list(g.adjacency)) out << a << ' ' << b << '\n';
  }
  {
    auto out = open(files.features);
    for (std::size_t i = 0; i < g.features.rows(); ++i) {
      auto row = g.features.row(i);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << format_double(row[c]);
      out << '\n';
    }
  }
  {
    auto out = open(files.labels);
    for (int y : g.labels) out << y << '\n';
  }
  if (files.split) {
    auto out = open(*files.split);
    const std::size_t n = g.num_nodes();
    auto at = [&](const Mask& m, std::size_t i) { return m.size() == n && m[i]; };
    for (std::size_t i = 0; i < n; ++i) {
      if (at(g.split.train, i)) out << "train\n";
      else if (at(g.split.val, i)) out << "val\n";
      else if (at(g.split.test, i)) out << "test\n";
      else out << "none\n";
    }
  }
}

}  // namespace cit
