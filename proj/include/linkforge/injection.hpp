#pragma once

// The trainable link-injection layer. J is stored unconstrained; only
// ReLU(J) ever reaches the adjacency, so entries that go negative are dead
// injections rather than negative links.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "linkforge/error.hpp"
#include "linkforge/graph.hpp"
#include "linkforge/rng.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

enum class InitMode { constant, uniform };

struct InjectionInit {
  InitMode mode = InitMode::constant;
  double value = 0.01;  // constant mode
  double lo = 0.0;      // uniform mode
  double hi = 0.01;
};

struct InjectionParam {
  Tensor j;
  InjectionInit init;
  std::uint64_t seed = 0;
  // Use (ReLU(J) + ReLU(J)^T) / 2 so the injected adjacency stays symmetric.
  bool symmetric = true;

  std::size_t n() const noexcept { return j.rows(); }

  static InjectionParam create(std::size_t n, InjectionInit init = {}, std::uint64_t seed = 0,
                               bool symmetric = true) {
    InjectionParam p;
    p.init = init;
    p.seed = seed;
    p.symmetric = symmetric;
    Matrix values(n, n);
    if (init.mode == InitMode::constant) {
      values.fill(init.value);
    } else {
      if (!(init.lo <= init.hi)) fail(ErrorKind::config, "uniform injection init needs lo <= hi");
      Rng rng = Rng(seed).split(0x1a7ec7);
      for (double& v : values.data()) v = rng.uniform(init.lo, init.hi);
    }
    p.j = Tensor(std::move(values), true);
    return p;
  }

  /// Injection actually added to A: ReLU(J) (symmetrized if configured),
  /// zero on the diagonal.
  Matrix effective() const {
    const Matrix& raw = j.value;
    const std::size_t n = raw.rows();
    Matrix e(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        const double x = std::max(raw(a, b), 0.0);
        e(a, b) = symmetric ? 0.5 * (x + std::max(raw(b, a), 0.0)) : x;
      }
    }
    return e;
  }
};

/// clip01(A + injection(J)). Differentiable in both A and J.
inline Var inject(const Var& adjacency, const Var& j, bool symmetric) {
  const Matrix& a = adjacency.value();
  require_square(a, "inject");
  Matrix::require_same_shape(a, j.value(), "inject");
  Tape& tape = detail::tape_of(adjacency);
  const std::size_t n = a.rows();
  Matrix off_diagonal(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) off_diagonal(i, i) = 0.0;

  Var positive = relu(j);
  if (symmetric) positive = scale(add(positive, transpose(positive)), 0.5);
  positive = hadamard(positive, tape.constant(std::move(off_diagonal)));
  return clip01(add(adjacency, positive));
}

inline Var inject(Tape& tape, const Matrix& adjacency, InjectionParam& param) {
  if (param.n() != adjacency.rows()) {
    fail(ErrorKind::dimension, "injection " + param.j.value.shape() + " vs adjacency " + adjacency.shape());
  }
  return inject(tape.constant(adjacency), tape.leaf(param.j), param.symmetric);
}

/// lambda * ||J||. Returns an exact zero (still on the tape) when lambda is 0.
inline Var injection_penalty(const Var& j, double lambda) {
  return scale(l2_norm(j), lambda);
}

struct RankedLink {
  std::size_t i = 0;
  std::size_t j = 0;
  double score = 0.0;
  bool operator==(const RankedLink&) const = default;
};

struct RankedInjections {
  std::vector<RankedLink> links;
  std::size_t requested = 0;
  bool truncated = false;  // fewer than `requested` positive candidates

  std::size_t size() const noexcept { return links.size(); }
};

/// Top-k off-diagonal injection scores, descending, ties broken by (i, j).
/// Only strictly positive scores are candidates; pairs in `exclude` are
/// removed before ranking.
inline RankedInjections top_k_injections(const InjectionParam& param, std::size_t k,
                                         const PairSet* exclude = nullptr) {
  const Matrix scores = param.effective();
  const std::size_t n = scores.rows();
  if (k > n * n) fail(ErrorKind::invalid_argument, "k exceeds N^2");
  std::vector<RankedLink> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !(scores(i, j) > 0.0)) continue;
      if (exclude != nullptr && exclude->contains(i, j)) continue;
      candidates.push_back({i, j, scores(i, j)});
    }
  }
  auto order = [](const RankedLink& a, const RankedLink& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  };
  RankedInjections out;
  out.requested = k;
  out.truncated = candidates.size() < k;
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(), order);
  candidates.resize(take);
  out.links = std::move(candidates);
  return out;
}

struct InjectionSnapshot {
  static constexpr std::size_t kBins = 50;

  std::size_t epoch = 0;
  double total = 0.0;             // sum of ReLU(J)
  std::size_t nonzero_count = 0;  // entries with ReLU(J) > 0
  double max_value = 0.0;
  std::vector<std::size_t> histogram = std::vector<std::size_t>(kBins, 0);

  double bin_lo(std::size_t b) const { return max_value * static_cast<double>(b) / kBins; }
  double bin_hi(std::size_t b) const { return max_value * static_cast<double>(b + 1) / kBins; }
};

/// Statistics over ReLU(J). Histogram: 50 equal bins over (0, max], bin b
/// covering (b*w, (b+1)*w].
inline InjectionSnapshot snapshot(const InjectionParam& param, std::size_t epoch) {
  InjectionSnapshot s;
  s.epoch = epoch;
  for (double v : param.j.value.data()) {
    if (v > 0.0) {
      s.total += v;
      ++s.nonzero_count;
      s.max_value = std::max(s.max_value, v);
    }
  }
  if (s.nonzero_count == 0) return s;
  const double width = s.max_value / InjectionSnapshot::kBins;
  for (double v : param.j.value.data()) {
    if (!(v > 0.0)) continue;
    auto b = static_cast<std::size_t>(std::ceil(v / width));
    b = std::clamp<std::size_t>(b, 1, InjectionSnapshot::kBins) - 1;
    ++s.histogram[b];
  }
  return s;
}

}  // namespace linkforge
