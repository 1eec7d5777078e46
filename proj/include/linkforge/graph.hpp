#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "linkforge/error.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

using NodeMask = std::vector<bool>;

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

/// Node features X (N x D), binary symmetric adjacency A (N x N), labels Y.
struct Graph {
  Matrix features;
  Matrix adjacency;
  std::vector<int> labels;
  std::size_t n_classes = 0;

  std::size_t n_nodes() const noexcept { return adjacency.rows(); }
  std::size_t n_features() const noexcept { return features.cols(); }

  void validate() const {
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n) fail(ErrorKind::dimension, "adjacency must be square, got " + adjacency.shape());
    if (features.rows() != n) {
      fail(ErrorKind::dimension, "features " + features.shape() + " vs " + std::to_string(n) + " nodes");
    }
    if (labels.size() != n) {
      fail(ErrorKind::dimension, std::to_string(labels.size()) + " labels for " + std::to_string(n) + " nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
        fail(ErrorKind::label, "node " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                                   " with " + std::to_string(n_classes) + " classes");
      }
      if (adjacency(i, i) != 0.0) fail(ErrorKind::integrity, "self loop at node " + std::to_string(i));
      for (std::size_t j = 0; j < n; ++j) {
        const double a = adjacency(i, j);
        if (a != 0.0 && a != 1.0) fail(ErrorKind::integrity, "adjacency must be binary");
        if (a != adjacency(j, i)) fail(ErrorKind::integrity, "adjacency must be symmetric");
      }
    }
  }
};

struct SplitMasks {
  NodeMask train;
  NodeMask val;
  NodeMask test;

  /// Pairwise disjoint and sized to n.
  void validate(std::size_t n) const {
    if (train.size() != n || val.size() != n || test.size() != n) {
      fail(ErrorKind::dimension, "split masks must have one entry per node");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (int(train[i]) + int(val[i]) + int(test[i]) > 1) {
        fail(ErrorKind::integrity, "node " + std::to_string(i) + " appears in more than one split");
      }
    }
  }
};

inline std::size_t count(const NodeMask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

struct DegreeStats {
  std::size_t min = 0;
  std::size_t max = 0;
  double avg = 0.0;
};

/// Set of directed node pairs. Undirected edges are inserted in both
/// orientations.
class PairSet {
 public:
  PairSet() = default;
  explicit PairSet(std::size_t n) : n_(n) {}

  void insert(std::size_t i, std::size_t j) { keys_.insert(key(i, j)); }
  void insert_undirected(std::size_t i, std::size_t j) {
    insert(i, j);
    insert(j, i);
  }
  bool contains(std::size_t i, std::size_t j) const { return keys_.count(key(i, j)) != 0; }
  std::size_t size() const noexcept { return keys_.size(); }
  std::size_t n() const noexcept { return n_; }

  static PairSet from_edges(std::size_t n, const std::vector<Edge>& edges) {
    PairSet s(n);
    for (const Edge& e : edges) s.insert_undirected(e.u, e.v);
    return s;
  }

 private:
  std::uint64_t key(std::size_t i, std::size_t j) const {
    return static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n_) + j;
  }
  std::size_t n_ = 0;
  std::unordered_set<std::uint64_t> keys_;
};

inline void require_square(const Matrix& a, const char* op) {
  if (a.rows() != a.cols()) fail(ErrorKind::dimension, std::string(op) + ": adjacency " + a.shape() + " is not square");
}

/// Undirected edges with u < v, ordered lexicographically.
inline std::vector<Edge> undirected_edges(const Matrix& adjacency) {
  require_square(adjacency, "undirected_edges");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < adjacency.rows(); ++i)
    for (std::size_t j = i + 1; j < adjacency.cols(); ++j)
      if (adjacency(i, j) > 0.0 || adjacency(j, i) > 0.0) edges.push_back({i, j});
  return edges;
}

inline Matrix adjacency_from_edges(std::size_t n, const std::vector<Edge>& edges) {
  Matrix a(n, n);
  for (const Edge& e : edges) {
    if (e.u >= n || e.v >= n) {
      fail(ErrorKind::bounds, "edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ") outside " +
                                  std::to_string(n) + " nodes");
    }
    if (e.u == e.v) continue;
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  return a;
}

inline Matrix symmetrize(const Matrix& adjacency) {
  require_square(adjacency, "symmetrize");
  Matrix out = adjacency;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = std::max(adjacency(i, j), adjacency(j, i));
  return out;
}

inline Matrix strip_self_loops(const Matrix& adjacency) {
  require_square(adjacency, "strip_self_loops");
  Matrix out = adjacency;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) = 0.0;
  return out;
}

namespace detail {

inline std::vector<double> gcn_scales(const Matrix& a) {
  std::vector<double> s(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double d = 1.0;  // self loop
    for (double v : a.row(i)) d += v;
    s[i] = 1.0 / std::sqrt(d);
  }
  return s;
}

}  // namespace detail

/// D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I. Differentiable
/// in A: the degrees are recomputed from whatever adjacency is passed in.
inline Var gcn_normalize(const Var& adjacency) {
  const Matrix& a = adjacency.value();
  require_square(a, "gcn_normalize");
  for (double v : a.data()) {
    if (v < 0.0) fail(ErrorKind::invalid_argument, "gcn_normalize: adjacency has negative entries");
  }
  const std::size_t n = a.rows();
  std::vector<double> s = detail::gcn_scales(a);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) * s[i] * s[j];

  return detail::tape_of(adjacency).record(std::move(out), {adjacency}, [adjacency, s](Tape& t, const Matrix& g) {
    const Matrix& a = adjacency.value();
    const std::size_t n = a.rows();
    // out_ij = ahat_ij s_i s_j, s_i = d_i^{-1/2}, d_i = 1 + sum_j a_ij.
    // dL/dd_i = -0.5 s_i^3 * (sum_j g_ij ahat_ij s_j + sum_k g_ki ahat_ki s_k)
    std::vector<double> dd(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double ahat = a(i, j) + (i == j ? 1.0 : 0.0);
        if (ahat == 0.0) continue;
        const double w = g(i, j) * ahat;
        dd[i] += w * s[j];
        dd[j] += w * s[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) dd[i] *= -0.5 * s[i] * s[i] * s[i];
    Matrix ga(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ga(i, j) = g(i, j) * s[i] * s[j] + dd[i];
    t.accumulate(adjacency, ga);
  }, "gcn_normalize");
}

/// Each row divided by its sum; all-zero rows stay zero (with zero gradient).
inline Var row_normalize(const Var& adjacency) {
  const Matrix& a = adjacency.value();
  for (double v : a.data()) {
    if (v < 0.0) fail(ErrorKind::invalid_argument, "row_normalize: negative entries");
  }
  std::vector<double> sums(a.rows(), 0.0);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (double v : a.row(i)) sums[i] += v;
    if (sums[i] > 0.0)
      for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) / sums[i];
  }
  Matrix saved = out;
  return detail::tape_of(adjacency).record(std::move(out), {adjacency},
      [adjacency, sums, o = std::move(saved)](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
          if (sums[i] <= 0.0) continue;
          double dot = 0.0;
          for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * o(i, j);
          for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) = (g(i, j) - dot) / sums[i];
        }
        t.accumulate(adjacency, ga);
      }, "row_normalize");
}

/// Component id per node over edges with weight > threshold; each id is the
/// smallest node index in its component.
inline std::vector<std::size_t> connected_components(const Matrix& adjacency, double threshold = 0.0) {
  require_square(adjacency, "connected_components");
  const std::size_t n = adjacency.rows();
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(n, unset);
  std::queue<std::size_t> frontier;
  for (std::size_t root = 0; root < n; ++root) {
    if (comp[root] != unset) continue;
    comp[root] = root;
    frontier.push(root);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v = 0; v < n; ++v) {
        if (comp[v] == unset && (adjacency(u, v) > threshold || adjacency(v, u) > threshold)) {
          comp[v] = root;
          frontier.push(v);
        }
      }
    }
  }
  return comp;
}

inline void require_node(const Matrix& adjacency, std::size_t i) {
  if (i >= adjacency.rows()) {
    fail(ErrorKind::bounds, "node " + std::to_string(i) + " outside " + std::to_string(adjacency.rows()) + " nodes");
  }
}

inline bool is_neighbor(const Matrix& adjacency, std::size_t i, std::size_t j) {
  require_node(adjacency, i);
  require_node(adjacency, j);
  return adjacency(i, j) > 0.0;
}

inline bool shortest_path_exists(const Matrix& adjacency, std::size_t i, std::size_t j) {
  require_node(adjacency, i);
  require_node(adjacency, j);
  if (i == j) return true;
  const std::size_t n = adjacency.rows();
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  seen[i] = true;
  frontier.push(i);
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v = 0; v < n; ++v) {
      if (seen[v] || !(adjacency(u, v) > 0.0 || adjacency(v, u) > 0.0)) continue;
      if (v == j) return true;
      seen[v] = true;
      frontier.push(v);
    }
  }
  return false;
}

inline DegreeStats degree_stats(const Matrix& adjacency) {
  require_square(adjacency, "degree_stats");
  const std::size_t n = adjacency.rows();
  if (n == 0) return {};
  DegreeStats s{static_cast<std::size_t>(-1), 0, 0.0};
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t d = 0;
    for (double v : adjacency.row(i)) d += v > 0.0 ? 1 : 0;
    s.min = std::min(s.min, d);
    s.max = std::max(s.max, d);
    total += d;
  }
  s.avg = static_cast<double>(total) / static_cast<double>(n);
  return s;
}

}  // namespace linkforge
