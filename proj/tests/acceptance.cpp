// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance            run criteria 1-8 (6 needs LINKFORGE_CORA_DIR)
//   acceptance --only N   run a single criterion
//   acceptance --cora-full  also run the long full-Cora benchmark
//
// Exit status: 0 all run criteria passed, 1 a criterion failed, 77 every
// selected criterion was skipped.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace lf_test;

namespace {

struct Outcome {
  enum Status { pass, fail, skip } status = fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

constexpr double kGradBudgetSeconds = 30.0;

Var probe(Tape& t, const Var& out, Rng& rng) {
  return sum(hadamard(out, t.constant(random_matrix(out.rows(), out.cols(), rng))));
}

// Values at least `gap` away from both clip kinks 0 and 1.
Matrix clip_fixture(std::size_t r, std::size_t c, Rng& rng, double gap = 0.05) {
  Matrix m(r, c);
  for (double& v : m.data()) {
    do {
      v = rng.uniform(-0.5, 1.5);
    } while (std::abs(v) < gap || std::abs(v - 1.0) < gap);
  }
  return m;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240);
  std::vector<std::string> failed;
  std::size_t checks = 0;
  auto check = [&](const std::string& name, const LossFn& f, const std::vector<Tensor*>& params) {
    ++checks;
    const auto bad = gradient_check(f, params);
    if (!bad.empty()) failed.push_back(name + " (" + std::to_string(bad.size()) + " entries)");
  };

  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 6 + rng.index(5), d = 3 + rng.index(3);
    Tensor a(random_matrix(n, d, rng), true), b(random_matrix(n, d, rng), true), c(random_matrix(d, n, rng), true);
    Tensor kinked(away_from_zero(n, d, rng), true), clipped(clip_fixture(n, n, rng), true);
    Tensor positive(random_matrix(n, n, rng, 0.05, 1.0), true), j(away_from_zero(n, n, rng, 0.05, 0.4), true);
    const std::uint64_t s = rng.next_u64();
    auto p = [s](Tape& t, const Var& v) {
      Rng r(s);
      return probe(t, v, r);
    };
    check("matmul", [&](Tape& t) { return p(t, matmul(t.leaf(a), t.leaf(c))); }, {&a, &c});
    check("add", [&](Tape& t) { return p(t, add(t.leaf(a), t.leaf(b))); }, {&a, &b});
    check("sub", [&](Tape& t) { return p(t, sub(t.leaf(a), t.leaf(b))); }, {&a, &b});
    check("hadamard", [&](Tape& t) { return p(t, hadamard(t.leaf(a), t.leaf(b))); }, {&a, &b});
    check("scale", [&](Tape& t) { return p(t, scale(t.leaf(a), -1.7)); }, {&a});
    check("transpose", [&](Tape& t) { return p(t, transpose(t.leaf(a))); }, {&a});
    check("sum", [&](Tape& t) { return sum(hadamard(t.leaf(a), t.leaf(b))); }, {&a, &b});
    check("relu", [&](Tape& t) { return p(t, relu(t.leaf(kinked))); }, {&kinked});
    check("clip01", [&](Tape& t) { return p(t, clip01(t.leaf(clipped))); }, {&clipped});
    check("sigmoid", [&](Tape& t) { return p(t, sigmoid(t.leaf(a))); }, {&a});
    check("frobenius_sq", [&](Tape& t) { return frobenius_sq(t.leaf(a)); }, {&a});
    check("l2_norm", [&](Tape& t) { return l2_norm(t.leaf(a)); }, {&a});
    check("add_scalars", [&](Tape& t) { return add_scalars({l2_norm(t.leaf(a)), frobenius_sq(t.leaf(b))}); }, {&a, &b});

    std::vector<int> labels(n);
    NodeMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.index(d));
      mask[i] = rng.bernoulli(0.6);
    }
    mask[0] = true;
    check("masked_softmax_cross_entropy", [&](Tape& t) { return masked_softmax_cross_entropy(t.leaf(a), labels, mask); },
          {&a});
    check("gcn_normalize", [&](Tape& t) { return p(t, gcn_normalize(t.leaf(positive))); }, {&positive});
    check("row_normalize", [&](Tape& t) { return p(t, row_normalize(t.leaf(positive))); }, {&positive});

    const Matrix adjacency = random_adjacency(n, 0.3, rng);
    for (bool symmetric : {false, true}) {
      check(symmetric ? "inject (symmetric)" : "inject",
            [&](Tape& t) { return p(t, inject(t.constant(adjacency), t.leaf(j), symmetric)); }, {&j});
    }
    check("injection_penalty", [&](Tape& t) { return injection_penalty(t.leaf(j), 0.3); }, {&j});
    Tensor scores(random_matrix(n, n, rng, 0.0, 1.0), true);
    check("link_pred_loss", [&](Tape& t) { return link_pred_loss(t.constant(adjacency), t.leaf(scores), 0.1); },
          {&scores});

    Tensor h(random_matrix(n, d, rng), true), w(random_matrix(d, 4, rng), true), w2(random_matrix(d, 4, rng), true);
    check("gcn_layer_forward", [&](Tape& t) {
      return p(t, gcn_layer_forward(gcn_normalize(t.leaf(positive)), t.leaf(h), t.leaf(w), Activation::relu));
    }, {&positive, &h, &w});
    check("sage_layer_forward", [&](Tape& t) {
      return p(t, sage_layer_forward(row_normalize(t.leaf(positive)), t.leaf(h), t.leaf(w), t.leaf(w2), Activation::none));
    }, {&positive, &h, &w, &w2});
    check("simple_gnn_layer_forward", [&](Tape& t) {
      return p(t, simple_gnn_layer_forward(t.leaf(positive), t.leaf(h), t.leaf(w), Activation::none));
    }, {&positive, &h, &w});
  }

  for (LayerKind kind : {LayerKind::gcn, LayerKind::sage_mean, LayerKind::simple}) {
    for (std::size_t n : {6u, 8u, 10u}) {
      ModelFixture f = model_fixture(n, 300 + n);
      Model node_model = Model::make(kind, 4, 5, 3, 2, n);
      check(std::string(to_string(kind)) + " node loss n=" + std::to_string(n), [&](Tape& t) {
        Var a = inject(t, f.graph.adjacency, f.injection);
        Var logits = forward_node_clf(node_model, t.constant(f.graph.features), a);
        return add_scalars({masked_softmax_cross_entropy(logits, f.graph.labels, f.train),
                            detail::weight_penalty(t, node_model, 5e-4), injection_penalty(t.leaf(f.injection.j), 5e-4)});
      }, params_of(node_model, f.injection));

      Model link_model = Model::make(kind, 4, 5, 3, 2, n + 1);
      check(std::string(to_string(kind)) + " link loss n=" + std::to_string(n), [&](Tape& t) {
        Var a = t.constant(f.graph.adjacency);
        Var s = forward_link_pred(link_model, t.constant(f.graph.features), inject(a, t.leaf(f.injection.j), true));
        return add_scalars({link_pred_loss(a, s, 1e-4), detail::weight_penalty(t, link_model, 5e-4),
                            injection_penalty(t.leaf(f.injection.j), 5e-4)});
      }, params_of(link_model, f.injection));
    }
  }

  const double elapsed = seconds_since(t0);
  std::string detail = fmt("%zu gradient checks, %zu failed, %.1f s (limit %.0f s)", checks, failed.size(), elapsed,
                           kGradBudgetSeconds);
  for (const std::string& name : failed) detail += "; " + name;
  return verdict(failed.empty() && elapsed < kGradBudgetSeconds, detail);
}

// ---------------------------------------------------------------------------
// 2. Early stopping

Outcome early_stopping() {
  const EarlyStopConfig cfg;  // window 100, tolerance 0.005, earliest 5000
  struct Row {
    std::size_t len;
    double prev, last;
    StopDecision expect;
  };
  const std::vector<Row> table{
      {4999, 0.90, 0.10, StopDecision::keep_going},   // before the earliest epoch
      {5000, 0.80, 0.79, StopDecision::stop},         // drop of 0.01
      {5000, 0.80, 0.797, StopDecision::keep_going},  // drop of 0.003
      {5000, 0.80, 0.7951, StopDecision::keep_going},
      {5000, 0.80, 0.7949, StopDecision::stop},
      {5000, 0.70, 0.90, StopDecision::keep_going},   // improving
      {5000, 0.50, 0.50, StopDecision::keep_going},
      {5001, 0.60, 0.40, StopDecision::stop},
      {7000, 0.85, 0.80, StopDecision::stop},
      {200, 0.90, 0.10, StopDecision::keep_going},
      {0, 0.0, 0.0, StopDecision::keep_going},
  };
  std::size_t table_bad = 0;
  for (const Row& r : table) {
    const std::vector<double> h = r.len >= 2 * cfg.window ? windows(r.len, r.prev, r.last) : std::vector<double>(r.len, 0.5);
    if (early_stop_check(h, cfg) != r.expect) ++table_bad;
  }

  Rng rng(5000);
  std::size_t random_bad = 0, stops = 0;
  constexpr int kHistories = 1000;
  for (int trial = 0; trial < kHistories; ++trial) {
    const std::size_t len = 4900 + rng.index(400);
    std::vector<double> h(len);
    double level = rng.uniform(0.4, 0.8);
    const double drift = rng.uniform(-4e-5, 2e-5);
    for (double& v : h) {
      level += drift + rng.uniform(-0.004, 0.004);
      v = level;
    }
    const bool got = early_stop_check(h, cfg) == StopDecision::stop;
    stops += got ? 1 : 0;
    if (got != oracle_stop(h, cfg)) ++random_bad;
  }
  return verdict(table_bad == 0 && random_bad == 0,
                 fmt("table %zu/%zu wrong; random %zu/%d disagree with window-mean oracle (%zu stop, %zu continue)",
                     table_bad, table.size(), random_bad, kHistories, stops, kHistories - stops));
}

// ---------------------------------------------------------------------------
// 3. Metric oracles

constexpr double kMetricTol = 1e-12;

Outcome metric_oracles() {
  Rng rng(31);
  std::size_t bad = 0, checks = 0;
  auto near = [&](double a, double b) {
    ++checks;
    if (!(std::abs(a - b) <= kMetricTol)) ++bad;
  };

  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 5 + rng.index(40), c = 2 + rng.index(5);
    const Matrix logits = random_matrix(n, c, rng);
    std::vector<int> labels(n);
    NodeMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.index(c));
      mask[i] = rng.bernoulli(0.7);
    }
    mask[0] = true;
    near(accuracy_macro(logits, labels, mask).value, macro_recall_oracle(logits, labels, mask));
  }

  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(60);
    std::vector<double> s(n);
    const bool coarse = rng.bernoulli(0.5);
    for (double& v : s) v = coarse ? std::round(rng.uniform() * 6.0) / 6.0 : rng.uniform();
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = rng.bernoulli(0.4);
    pos[0] = true;
    pos[1] = false;
    near(auc_binary(s, pos), pairwise_auc(s, pos));
  }

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 12 + rng.index(30), c = 3;
    const Matrix p = random_matrix(n, c, rng, 0.0, 1.0);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);
    double oracle = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      std::vector<double> s(n);
      std::vector<bool> pos(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = p(i, k);
        pos[i] = labels[i] == static_cast<int>(k);
      }
      oracle += pairwise_auc(s, pos);
    }
    near(auc_roc_macro(p, labels, NodeMask(n, true)), oracle / static_cast<double>(c));
  }

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 6 + rng.index(5);
    const Matrix s = random_matrix(n, n, rng, 0.0, 1.0);
    std::vector<Edge> pos, neg;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) (rng.bernoulli(0.5) ? pos : neg).push_back({i, j});
    const double thr = rng.uniform();
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const Edge& e : pos) (s(e.u, e.v) >= thr ? tp : fn)++;
    for (const Edge& e : neg) (s(e.u, e.v) >= thr ? fp : tn)++;
    const LinkPredReport r = link_pred_report(s, pos, neg, thr);
    ++checks;
    if (r.tp != tp || r.fp != fp || r.tn != tn || r.fn != fn) ++bad;
    near(r.accuracy, double(tp + tn) / double(tp + tn + fp + fn));
    near(r.recall, double(tp) / double(tp + fn));
    near(r.precision, tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp));
  }

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng.index(10);
    const Matrix a = random_adjacency(n, 0.25, rng);
    const auto edges = undirected_edges(a);
    std::vector<Edge> train;
    for (const Edge& e : edges)
      if (rng.bernoulli(0.6)) train.push_back(e);
    const std::size_t k = 1 + rng.index(n * (n - 1));
    std::vector<RankedLink> ranked;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t i = rng.index(n);
      std::size_t j = rng.index(n - 1);
      if (j >= i) ++j;
      ranked.push_back({i, j, 1.0});
    }
    const auto r = injection_quality(ranked, PairSet::from_edges(n, edges), PairSet::from_edges(n, train),
                                     connected_components(a));
    auto in_train = [&](std::size_t i, std::size_t j) {
      for (const Edge& e : train)
        if ((e.u == i && e.v == j) || (e.u == j && e.v == i)) return true;
      return false;
    };
    std::size_t hits = 0, fresh = 0, disc = 0;
    double rank_sum = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const RankedLink& l = ranked[p];
      if (a(l.i, l.j) > 0) {
        ++hits;
        rank_sum += static_cast<double>(p + 1);
        if (!in_train(l.i, l.j)) ++fresh;
      } else if (!shortest_path_exists(a, l.i, l.j)) {
        ++disc;
      }
    }
    ++checks;
    if (r.hits_total != hits || r.hits_not_in_train != fresh || r.mean_rank.has_value() != (hits > 0)) ++bad;
    near(r.hit_rate_total, double(hits) / double(k));
    near(r.hit_rate_not_in_train, double(fresh) / double(k));
    near(r.neighbor_fraction, double(hits) / double(k));
    near(r.disconnected_fraction, double(disc) / double(k));
    if (hits > 0 && r.mean_rank) {
      near(*r.mean_rank, rank_sum / double(hits));
      near(*r.mr_ratio, 1.0 - rank_sum / double(hits) / double(k));
    }
  }

  // Published arithmetic, computed through injection_quality: 6410 hits in
  // a 10556-long list, and a single hit at rank 2567.
  constexpr std::size_t k = 10556;
  std::vector<RankedLink> ranked(k);
  PairSet observed(k + 1), single(k + 1);
  for (std::size_t p = 0; p < k; ++p) {
    ranked[p] = {p, p + 1, 1.0};
    if (p < 6410) observed.insert(p, p + 1);
  }
  single.insert(2566, 2567);
  const std::vector<std::size_t> one_component(k + 1, 0);
  const auto hits = injection_quality(ranked, observed, PairSet(k + 1), one_component);
  const auto mr = injection_quality(ranked, single, PairSet(k + 1), one_component);
  const double hit_pct = std::round(hits.hit_rate_total * 1e5) / 1e3;
  const double ratio = std::round(*mr.mr_ratio * 1e4) / 1e4;
  const bool identities = hit_pct == 60.724 && *mr.mean_rank == 2567.0 && ratio == 0.7568;

  return verdict(bad == 0 && identities, fmt("%zu/%zu oracle comparisons off by > 1e-12; hit rate %.3f%%, "
                                             "1 - 2567/10556 = %.4f",
                                             bad, checks, hit_pct, ratio));
}

// ---------------------------------------------------------------------------
// 4 and 7. SBM recovery and injection sparsity dynamics

constexpr std::size_t kSbmSeeds = 5;
constexpr std::size_t kSbmEpochs = 1000;
constexpr double kDropFraction = 0.3;
constexpr double kRecoveryFactor = 3.0;
constexpr std::size_t kSeedsRequired = 4;
constexpr double kSeedBudgetSeconds = 120.0;

struct SbmRun {
  std::size_t k = 0, hits = 0;
  double expected = 0.0;
  double seconds = 0.0;
  std::string series_csv;
};

SbmRun sbm_recovery_run(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SbmSpec spec;
  spec.seed = seed;
  const DatasetBundle data = generate_sbm(spec);
  const Graph& g = data.graph;
  const std::size_t n = g.n_nodes();

  std::vector<Edge> intra;
  for (const Edge& e : undirected_edges(g.adjacency))
    if (g.labels[e.u] == g.labels[e.v]) intra.push_back(e);
  Rng rng = Rng(seed).split(0xacce);
  rng.shuffle(std::span<Edge>(intra));
  intra.resize(static_cast<std::size_t>(std::llround(kDropFraction * static_cast<double>(intra.size()))));
  const DroppedGraph dropped = drop_edges(g, intra);

  // The model trains on every surviving edge. Dropped edges and an equal
  // number of true non-edges only feed the logged validation metric; the
  // final J is scored, not the best-validation one.
  LinkSplit split;
  split.train_edges = undirected_edges(dropped.graph.adjacency);
  split.test_pos_edges = dropped.dropped;
  while (split.test_neg_edges.size() < dropped.dropped.size()) {
    const std::size_t i = rng.index(n), j = rng.index(n);
    if (i == j || g.adjacency(i, j) > 0) continue;
    split.test_neg_edges.push_back({std::min(i, j), std::max(i, j)});
  }

  Model model = Model::make(LayerKind::gcn, g.n_features(), 16, 16, 2, seed);
  InjectionParam injection = InjectionParam::create(n, {InitMode::constant, 0.01}, seed);
  TrainConfig cfg;
  cfg.task = Task::link_pred;
  cfg.max_epochs = kSbmEpochs;
  cfg.early_stopping = false;
  cfg.seed = seed;
  const TrainState state = train_link_pred(dropped.graph, split, model, &injection, cfg);

  SbmRun run;
  run.k = dropped.dropped.size();
  const PairSet observed = PairSet::from_edges(n, split.train_edges);
  const auto ranked = top_k_injections(injection, run.k, &observed);
  run.hits = count_hits(ranked.links, PairSet::from_edges(n, dropped.dropped));
  run.expected = static_cast<double>(run.k) * static_cast<double>(dropped.dropped.size()) / static_cast<double>(n * n - n);
  run.series_csv = snapshot_series_csv(state);
  run.seconds = seconds_since(t0);
  return run;
}

const std::vector<SbmRun>& sbm_runs() {
  static const std::vector<SbmRun> runs = [] {
    std::vector<SbmRun> out;
    for (std::uint64_t seed = 0; seed < kSbmSeeds; ++seed) out.push_back(sbm_recovery_run(seed));
    return out;
  }();
  return runs;
}

Outcome sbm_recovery() {
  std::size_t good = 0;
  double slowest = 0.0;
  std::string per_seed;
  for (std::size_t s = 0; s < kSbmSeeds; ++s) {
    const SbmRun& r = sbm_runs()[s];
    const double ratio = static_cast<double>(r.hits) / r.expected;
    good += ratio >= kRecoveryFactor ? 1 : 0;
    slowest = std::max(slowest, r.seconds);
    per_seed += fmt("%s%zu/%zu hits (%.1fx)", s ? ", " : "", r.hits, r.k, ratio);
  }
  return verdict(good >= kSeedsRequired && slowest < kSeedBudgetSeconds,
                 fmt("%zu/%zu seeds >= %.0fx random, slowest seed %.1f s: ", good, kSbmSeeds, kRecoveryFactor, slowest) +
                     per_seed);
}

Outcome sparsity_dynamics() {
  std::size_t good = 0;
  std::string per_seed;
  for (std::size_t s = 0; s < kSbmSeeds; ++s) {
    // Read back the exported series: epoch 0 is the initial snapshot.
    std::vector<double> total;
    std::vector<std::size_t> nonzero;
    const auto lines = detail::split_lines(sbm_runs()[s].series_csv);
    for (std::size_t l = 1; l < lines.size(); ++l) {
      const auto cells = detail::split_commas(lines[l]);
      total.push_back(detail::parse_real(cells[1], "series", l));
      nonzero.push_back(static_cast<std::size_t>(detail::parse_int(cells[2], "series", l)));
    }
    bool finite = true;
    for (double v : total) finite = finite && std::isfinite(v);
    const std::size_t epochs = total.size() - 1;
    const std::size_t tail = epochs - epochs / 5;
    std::size_t rises = 0;
    for (std::size_t e = tail + 1; e <= epochs; ++e) rises += total[e] > total[e - 1] ? 1 : 0;
    const bool ok = finite && nonzero.back() < nonzero.front() && rises == 0;
    good += ok ? 1 : 0;
    per_seed += fmt("%snonzero %zu->%zu, tail rises %zu", s ? "; " : "", nonzero.front(), nonzero.back(), rises);
  }
  return verdict(good == kSbmSeeds, fmt("%zu/%zu runs sparser and non-increasing over the last 20%%: ", good, kSbmSeeds) +
                                        per_seed);
}

// ---------------------------------------------------------------------------
// 5. No-edges ablation

constexpr double kMajorityBand = 0.05;
constexpr double kInjectionGain = 0.10;
// Weak features: with the adjacency zeroed a per-node classifier should sit
// near the majority rate, which is the regime the ablation describes.
constexpr double kAblationNoise = 4.0;
constexpr std::size_t kAblationEpochs = 1000;

Outcome no_edges_ablation() {
  double majority = 0.0, base = 0.0, with_injection = 0.0;
  for (std::uint64_t seed = 0; seed < kSbmSeeds; ++seed) {
    SbmSpec spec;
    spec.seed = seed;
    spec.feature_noise = kAblationNoise;
    const DatasetBundle data = generate_sbm(spec);
    const Graph& g = data.graph;
    std::vector<std::size_t> per_class(g.n_classes, 0);
    for (std::size_t i = 0; i < g.n_nodes(); ++i)
      if (data.masks.test[i]) ++per_class[static_cast<std::size_t>(g.labels[i])];
    majority += static_cast<double>(*std::max_element(per_class.begin(), per_class.end())) /
                static_cast<double>(count(data.masks.test));

    TrainConfig cfg;
    cfg.max_epochs = kAblationEpochs;
    cfg.early_stopping = false;
    cfg.seed = seed;

    Model baseline = Model::make(LayerKind::gcn, g.n_features(), 16, g.n_classes, 2, seed);
    TrainConfig plain = cfg;
    plain.injection_enabled = false;
    plain.no_edges_mode = true;
    const TrainState sb = train_node_clf(g, data.masks, baseline, nullptr, plain);
    restore_best(sb, baseline, nullptr);
    base += masked_accuracy(predict_node_logits(g, baseline, nullptr, true), g.labels, data.masks.test);

    Model model = Model::make(LayerKind::gcn, g.n_features(), 16, g.n_classes, 2, seed);
    InjectionParam injection = InjectionParam::create(g.n_nodes(), {}, seed);
    const TrainState si = run_no_edges_experiment(g, data.masks, model, &injection, cfg);
    restore_best(si, model, &injection);
    with_injection += masked_accuracy(predict_node_logits(g, model, &injection, true), g.labels, data.masks.test);
  }
  const double k = static_cast<double>(kSbmSeeds);
  majority /= k;
  base /= k;
  with_injection /= k;
  const bool base_ok = std::abs(base - majority) <= kMajorityBand;
  const bool gain_ok = with_injection - majority >= kInjectionGain;
  return verdict(base_ok && gain_ok, fmt("mean test accuracy over %zu seeds: majority %.3f, baseline %.3f (%s), "
                                         "injection %.3f (gain %+.3f, need %+.2f)",
                                         kSbmSeeds, majority, base, base_ok ? "in band" : "out of band", with_injection,
                                         with_injection - majority, kInjectionGain));
}

// ---------------------------------------------------------------------------
// 6. Node classification on a Cora subsample

constexpr std::size_t kCoraNodes = 800;
constexpr std::size_t kCoraEpochs = 2000;
constexpr double kCoraFloor = 0.70;
constexpr double kCoraBudgetSeconds = 20.0 * 60.0;
constexpr std::size_t kTrainPerClass = 20;
constexpr std::size_t kValNodes = 200;

// Breadth-first ball around the highest-degree node, so the subsample is
// connected.
DatasetBundle connected_subsample(const DatasetBundle& full, std::size_t limit, std::uint64_t seed) {
  const Graph& g = full.graph;
  const std::size_t n = g.n_nodes();
  std::size_t root = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += g.adjacency(i, j) > 0 ? 1.0 : 0.0;
    if (d > best) {
      best = d;
      root = i;
    }
  }
  std::vector<std::size_t> order{root};
  std::vector<bool> seen(n, false);
  seen[root] = true;
  std::deque<std::size_t> queue{root};
  while (!queue.empty() && order.size() < limit) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v = 0; v < n && order.size() < limit; ++v) {
      if (seen[v] || !(g.adjacency(u, v) > 0)) continue;
      seen[v] = true;
      order.push_back(v);
      queue.push_back(v);
    }
  }

  const std::size_t m = order.size();
  DatasetBundle out;
  out.name = full.name + "-sub" + std::to_string(m);
  Graph& s = out.graph;
  s.n_classes = g.n_classes;
  s.features = Matrix(m, g.n_features());
  s.adjacency = Matrix(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    s.labels.push_back(g.labels[order[a]]);
    for (std::size_t f = 0; f < g.n_features(); ++f) s.features(a, f) = g.features(order[a], f);
    for (std::size_t b = 0; b < m; ++b) s.adjacency(a, b) = g.adjacency(order[a], order[b]);
  }

  std::vector<std::size_t> shuffled(m);
  for (std::size_t a = 0; a < m; ++a) shuffled[a] = a;
  Rng(seed).split(0xc02a).shuffle(std::span<std::size_t>(shuffled));
  out.masks = {NodeMask(m, false), NodeMask(m, false), NodeMask(m, false)};
  std::vector<std::size_t> taken(s.n_classes, 0);
  std::size_t val = 0;
  for (std::size_t a : shuffled) {
    std::size_t& t = taken[static_cast<std::size_t>(s.labels[a])];
    if (t < kTrainPerClass) {
      out.masks.train[a] = true;
      ++t;
    } else if (val < kValNodes) {
      out.masks.val[a] = true;
      ++val;
    } else {
      out.masks.test[a] = true;
    }
  }
  return out;
}

double node_test_accuracy(const DatasetBundle& data, bool with_injection, std::size_t epochs, std::uint64_t seed) {
  const Graph& g = data.graph;
  Model model = Model::make(LayerKind::gcn, g.n_features(), 16, g.n_classes, 2, seed);
  InjectionParam injection = InjectionParam::create(g.n_nodes(), {}, seed);
  TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.injection_enabled = with_injection;
  cfg.seed = seed;
  InjectionParam* inj = with_injection ? &injection : nullptr;
  const TrainState state = train_node_clf(g, data.masks, model, inj, cfg);
  restore_best(state, model, inj);
  return masked_accuracy(predict_node_logits(g, model, inj, false), g.labels, data.masks.test);
}

Outcome cora_subsample() {
  const char* dir = std::getenv("LINKFORGE_CORA_DIR");
  if (dir == nullptr || *dir == '\0') return {Outcome::skip, "set LINKFORGE_CORA_DIR to a Cora dataset directory"};
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetBundle data = connected_subsample(load_dataset(dir), kCoraNodes, 0);
  const double base = node_test_accuracy(data, false, kCoraEpochs, 0);
  const double inj = node_test_accuracy(data, true, kCoraEpochs, 0);
  const double elapsed = seconds_since(t0);
  const bool ok = base >= kCoraFloor && inj >= base - 0.02 && inj <= base + 0.06 && elapsed < kCoraBudgetSeconds;
  return verdict(ok, fmt("%zu nodes, %zu epochs: baseline %.3f (need >= %.2f), injection %.3f (need [%.3f, %.3f]), "
                         "%.0f s",
                         data.graph.n_nodes(), kCoraEpochs, base, kCoraFloor, inj, base - 0.02, base + 0.06, elapsed));
}

// Opt-in long benchmark on the full dataset; reported, never gating.
void cora_full_benchmark() {
  const char* dir = std::getenv("LINKFORGE_CORA_DIR");
  if (dir == nullptr || *dir == '\0') {
    std::printf("benchmark cora-full: SKIP (LINKFORGE_CORA_DIR not set)\n");
    return;
  }
  const DatasetBundle data = load_dataset(dir);
  const double acc = node_test_accuracy(data, true, 10000, 0);
  std::printf("benchmark cora-full: %s injection GCN test accuracy %.3f (reference 0.772 +- 0.02)\n",
              std::abs(acc - 0.772) <= 0.02 ? "PASS" : "FAIL", acc);
}

// ---------------------------------------------------------------------------
// 8. Determinism

Outcome determinism() {
  TempDir tmp;
  const fs::path sbm_dir = cmd_gen_sbm(SbmSpec{}, tmp.path() / "sbm");
  std::ofstream(tmp.path() / "node.cfg") << "epochs=60\nseeds=2\nseed=3\nearly_stopping=false\n";
  std::ofstream(tmp.path() / "link.cfg") << "task=link_pred\nmodel=sage\nepochs=60\nseeds=2\nearly_stopping=false\n";

  struct Case {
    std::string name, config;
    fs::path dataset;
  };
  const std::vector<Case> cases{{"node-gcn", "node.cfg", LINKFORGE_SAMPLE_DIR},
                                {"node-gcn", "node.cfg", sbm_dir},
                                {"link-sage", "link.cfg", sbm_dir}};
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    std::vector<std::string> outputs;
    for (int rerun = 0; rerun < 2; ++rerun) {
      RunConfig cfg = RunConfig::parse(read_file(tmp.path() / cases[c].config));
      cfg.dataset = cases[c].dataset.string();
      cfg.out = (tmp.path() / ("runs" + std::to_string(c))).string();
      std::ostringstream log;
      const CommandResult r = cfg.task == "link_pred" ? cmd_train_link(cfg, log) : cmd_train_node(cfg, log);
      std::string bytes;
      for (const auto& entry : fs::recursive_directory_iterator(r.run_root)) {
        const std::string f = entry.path().filename().string();
        if (f == "epochs.csv" || f == "report.txt" || f == "aggregate.csv" || f == "manifest") {
          bytes += entry.path().string() + "\n" + read_file(entry.path());
          ++compared;
        }
      }
      const auto ckpt = r.run_root / std::to_string(cfg.seed) / "ckpt";
      std::ostringstream eval_log;
      bytes += to_report(cmd_eval_injection(ckpt, cfg.dataset, std::nullopt, eval_log).report).to_text();
      outputs.push_back(bytes);
      fs::remove_all(r.run_root);
    }
    if (outputs[0] != outputs[1]) differing.push_back(cases[c].name + " on " + cases[c].dataset.filename().string());
  }
  const bool stats_same = cmd_dataset_stats(sbm_dir) == cmd_dataset_stats(sbm_dir);
  std::string detail = fmt("%zu files compared across reruns", compared);
  for (const std::string& d : differing) detail += "; differs: " + d;
  if (!stats_same) detail += "; dataset-stats differs";
  return verdict(differing.empty() && stats_same, detail);
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  bool cora_full = false;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--only" && a + 1 < argc) {
      only = std::atoi(argv[++a]);
    } else if (arg == "--cora-full") {
      cora_full = true;
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N] [--cora-full]\n");
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradients},
      {2, "early-stopping rule", early_stopping},
      {3, "metric oracles", metric_oracles},
      {4, "SBM recovery", sbm_recovery},
      {5, "no-edges ablation", no_edges_ablation},
      {6, "Cora subsample node classification", cora_subsample},
      {7, "injection sparsity dynamics", sparsity_dynamics},
      {8, "determinism", determinism},
  };

  std::size_t ran = 0, failed = 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("error: ") + e.what()};
    }
    const char* tag = o.status == Outcome::pass ? "PASS" : (o.status == Outcome::fail ? "FAIL" : "SKIP");
    std::printf("criterion %d %-36s %s  %s\n", c.id, c.name, tag, o.detail.c_str());
    std::fflush(stdout);
    if (o.status != Outcome::skip) ++ran;
    if (o.status == Outcome::fail) ++failed;
  }
  if (cora_full) cora_full_benchmark();
  if (failed > 0) return 1;
  return ran == 0 ? 77 : 0;
}
