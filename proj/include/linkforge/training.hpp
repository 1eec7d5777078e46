#pragma once

// Training loops for node classification and link prediction with an
// optional trainable injection matrix, plus the sliding-window early stop.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linkforge/error.hpp"
#include "linkforge/graph.hpp"
#include "linkforge/injection.hpp"
#include "linkforge/metrics.hpp"
#include "linkforge/models.hpp"
#include "linkforge/rng.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

enum class Task { node_clf, link_pred };

inline const char* to_string(Task t) { return t == Task::node_clf ? "node_clf" : "link_pred"; }

struct EarlyStopConfig {
  std::size_t window = 100;
  double tolerance = 0.005;
  std::size_t earliest = 5000;

  void validate() const {
    if (window < 1) fail(ErrorKind::config, "early-stop window must be >= 1");
    if (earliest < 2 * window) fail(ErrorKind::config, "earliest stop must be >= 2 * window");
    if (!(tolerance >= 0.0)) fail(ErrorKind::config, "early-stop tolerance must be >= 0");
  }
};

enum class StopDecision { keep_going, stop };

/// `history` holds one validation metric per completed epoch. Stops once
/// at least `earliest` epochs are done and the mean of the latest window
/// is below the mean of the window before it by more than `tolerance`.
inline StopDecision early_stop_check(std::span<const double> history, const EarlyStopConfig& cfg) {
  const std::size_t epoch = history.size();
  if (epoch < cfg.earliest || epoch < 2 * cfg.window) return StopDecision::keep_going;
  double last = 0.0, prev = 0.0;
  for (std::size_t k = epoch - cfg.window; k < epoch; ++k) last += history[k];
  for (std::size_t k = epoch - 2 * cfg.window; k < epoch - cfg.window; ++k) prev += history[k];
  last /= static_cast<double>(cfg.window);
  prev /= static_cast<double>(cfg.window);
  return last < prev - cfg.tolerance ? StopDecision::stop : StopDecision::keep_going;
}

struct TrainConfig {
  Task task = Task::node_clf;
  std::size_t max_epochs = 10000;
  AdamaxOptions optimizer;            // model weights
  AdamaxOptions injection_optimizer;  // J
  double lambda_score = 1e-4;         // link prediction: lambda * ||S||_F^2
  double lambda_weights = 5e-4;       // coefficient on sum_p ||p||
  double lambda_injection = 5e-4;     // coefficient on ||J||
  EarlyStopConfig early_stop;
  bool early_stopping = true;
  bool injection_enabled = true;
  bool no_edges_mode = false;
  bool symmetric_injection = true;
  InjectionInit injection_init;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_epochs == 0) fail(ErrorKind::config, "max_epochs must be positive");
    early_stop.validate();
    if (lambda_score < 0 || lambda_weights < 0 || lambda_injection < 0) {
      fail(ErrorKind::config, "regularizer coefficients must be non-negative");
    }
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;
  double inj_total = 0.0;
  std::size_t inj_nonzero = 0;
};

struct TrainState {
  std::size_t epoch = 0;
  std::vector<EpochRecord> history;
  std::vector<AdamaxState> weight_optimizers;
  std::optional<AdamaxState> injection_optimizer;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<Matrix> best_weights;
  std::optional<Matrix> best_injection;
  std::optional<InjectionSnapshot> initial_snapshot;
  std::optional<InjectionSnapshot> final_snapshot;
  bool stopped_early = false;

  std::vector<double> val_history() const {
    std::vector<double> v;
    v.reserve(history.size());
    for (const EpochRecord& r : history) v.push_back(r.val_metric);
    return v;
  }
};

/// Undirected held-out split for link prediction.
struct LinkSplit {
  std::vector<Edge> train_edges;
  std::vector<Edge> test_pos_edges;
  std::vector<Edge> test_neg_edges;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Uniform random partition of the undirected edges plus one uniformly
/// sampled non-edge per held-out positive.
inline LinkSplit make_link_split(const Graph& graph, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorKind::config, "train fraction must lie in (0, 1)");
  const std::size_t n = graph.n_nodes();
  std::vector<Edge> edges = undirected_edges(graph.adjacency);
  Rng rng = Rng(seed).split(0x5b1175);
  rng.shuffle(std::span<Edge>(edges));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(edges.size())));

  LinkSplit split;
  split.train_fraction = train_fraction;
  split.seed = seed;
  split.train_edges.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_pos_edges.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train), edges.end());
  std::sort(split.train_edges.begin(), split.train_edges.end());
  std::sort(split.test_pos_edges.begin(), split.test_pos_edges.end());

  const std::size_t needed = split.test_pos_edges.size();
  const std::size_t pairs = n * (n - 1) / 2;
  const std::size_t available = pairs - edges.size();
  if (available < needed) {
    fail(ErrorKind::sampling, "graph too dense: " + std::to_string(available) + " non-edges for " +
                                  std::to_string(needed) + " negatives");
  }
  PairSet chosen(n);
  while (split.test_neg_edges.size() < needed) {
    const auto i = static_cast<std::size_t>(rng.index(n));
    const auto j = static_cast<std::size_t>(rng.index(n));
    if (i == j) continue;
    const Edge e{std::min(i, j), std::max(i, j)};
    if (graph.adjacency(e.u, e.v) > 0.0 || chosen.contains(e.u, e.v)) continue;
    chosen.insert(e.u, e.v);
    split.test_neg_edges.push_back(e);
  }
  return split;
}

namespace detail {

inline std::vector<AdamaxState> make_optimizers(const Model& model, const AdamaxOptions& options) {
  std::vector<AdamaxState> states;
  for (const Tensor& w : model.weights) states.emplace_back(w.rows(), w.cols(), options);
  return states;
}

inline void record_best(TrainState& state, double metric, const Model& model, const InjectionParam* injection) {
  if (!(metric > state.best_metric)) return;
  state.best_metric = metric;
  state.best_epoch = state.epoch;
  state.best_weights.clear();
  for (const Tensor& w : model.weights) state.best_weights.push_back(w.value);
  if (injection != nullptr) state.best_injection = injection->j.value;
}

// Shared per-epoch driver: `step` builds the loss on a fresh tape and
// returns (loss var, validation metric computed from this forward).
template <typename StepFn>
TrainState run_training(Model& model, InjectionParam* injection, const TrainConfig& cfg, StepFn step) {
  cfg.validate();
  TrainState state;
  state.weight_optimizers = make_optimizers(model, cfg.optimizer);
  if (injection != nullptr) {
    state.injection_optimizer = AdamaxState(injection->n(), injection->n(), cfg.injection_optimizer);
    state.initial_snapshot = snapshot(*injection, 0);
  }
  std::vector<double> val_history;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    state.epoch = epoch;
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      Tape tape;
      model.zero_grad();
      if (injection != nullptr) injection->j.zero_grad();
      auto [loss, metric] = step(tape);
      rec.train_loss = loss.value().scalar();
      rec.val_metric = metric;
      record_best(state, metric, model, injection);
      tape.backward(loss);
      // Model first, then J, both from the same backward pass.
      for (std::size_t w = 0; w < model.weights.size(); ++w) state.weight_optimizers[w].step(model.weights[w]);
      if (injection != nullptr) state.injection_optimizer->step(injection->j);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::non_finite) throw;
      std::string diag = "epoch " + std::to_string(epoch) + ": " + e.what();
      if (!state.history.empty()) diag += "; last finite loss " + std::to_string(state.history.back().train_loss);
      fail(ErrorKind::divergence, diag);
    }
    if (!std::isfinite(rec.train_loss)) fail(ErrorKind::divergence, "loss is not finite at epoch " + std::to_string(epoch));
    if (injection != nullptr) {
      const InjectionSnapshot snap = snapshot(*injection, epoch);
      rec.inj_total = snap.total;
      rec.inj_nonzero = snap.nonzero_count;
    }
    state.history.push_back(rec);
    val_history.push_back(rec.val_metric);
    if (cfg.early_stopping && early_stop_check(val_history, cfg.early_stop) == StopDecision::stop) {
      state.stopped_early = true;
      break;
    }
  }
  if (injection != nullptr) state.final_snapshot = snapshot(*injection, state.epoch);
  return state;
}

inline Var weight_penalty(Tape& tape, Model& model, double lambda) {
  std::vector<Var> norms;
  for (Tensor& w : model.weights) norms.push_back(l2_norm(tape.leaf(w)));
  return scale(add_scalars(norms), lambda);
}

inline Var injected_adjacency(Tape& tape, const Matrix& adjacency, InjectionParam* injection) {
  if (injection == nullptr) return tape.constant(adjacency);
  return inject(tape, adjacency, *injection);
}

}  // namespace detail

/// Loss = CE(S, Y | train) + lambda_W sum_p ||p|| + lambda_J ||J||; the
/// validation metric is plain accuracy on the val mask.
inline TrainState train_node_clf(const Graph& graph, const SplitMasks& masks, Model& model,
                                 InjectionParam* injection, const TrainConfig& cfg) {
  if (cfg.task != Task::node_clf) fail(ErrorKind::config, "train_node_clf needs task node_clf");
  if (count(masks.train) == 0) fail(ErrorKind::config, "empty training mask");
  if (count(masks.val) == 0) fail(ErrorKind::config, "empty validation mask");
  masks.validate(graph.n_nodes());
  if (model.output_dim() != graph.n_classes) {
    fail(ErrorKind::config, "model outputs " + std::to_string(model.output_dim()) + " classes, graph has " +
                                std::to_string(graph.n_classes));
  }
  if (!cfg.injection_enabled) injection = nullptr;
  if (injection != nullptr && injection->n() != graph.n_nodes()) {
    fail(ErrorKind::dimension, "injection size does not match the graph");
  }
  const Matrix adjacency = cfg.no_edges_mode ? Matrix(graph.n_nodes(), graph.n_nodes()) : graph.adjacency;

  return detail::run_training(model, injection, cfg, [&](Tape& tape) {
    Var x = tape.constant(graph.features);
    Var a = detail::injected_adjacency(tape, adjacency, injection);
    Var logits = forward_node_clf(model, x, a);
    std::vector<Var> terms{masked_softmax_cross_entropy(logits, graph.labels, masks.train),
                           detail::weight_penalty(tape, model, cfg.lambda_weights)};
    if (injection != nullptr) terms.push_back(injection_penalty(tape.leaf(injection->j), cfg.lambda_injection));
    const double metric = masked_accuracy(logits.value(), graph.labels, masks.val);
    return std::pair{add_scalars(terms), metric};
  });
}

/// Node classification with the observed adjacency replaced by zeros, so
/// any structure has to come from the injection.
inline TrainState run_no_edges_experiment(const Graph& graph, const SplitMasks& masks, Model& model,
                                          InjectionParam* injection, const TrainConfig& cfg) {
  if (injection == nullptr || !cfg.injection_enabled) {
    fail(ErrorKind::config, "the no-edges experiment needs an enabled injection");
  }
  TrainConfig c = cfg;
  c.no_edges_mode = true;
  return train_node_clf(graph, masks, model, injection, c);
}

/// || ReLU(A - S) ||_F^2 + lambda ||S||_F^2, A the training adjacency.
inline Var link_pred_loss(const Var& adjacency, const Var& scores, double lambda) {
  return add(frobenius_sq(relu(sub(adjacency, scores))), scale(frobenius_sq(scores), lambda));
}

/// Trains on the split's training edges only; the validation metric is
/// pair accuracy on the held-out positives/negatives at threshold 0.5.
inline TrainState train_link_pred(const Graph& graph, const LinkSplit& split, Model& model,
                                  InjectionParam* injection, const TrainConfig& cfg) {
  if (cfg.task != Task::link_pred) fail(ErrorKind::config, "train_link_pred needs task link_pred");
  if (split.train_edges.empty()) fail(ErrorKind::config, "link split has no training edges");
  if (split.test_pos_edges.empty() || split.test_neg_edges.empty()) fail(ErrorKind::config, "link split has no held-out pairs");
  if (!cfg.injection_enabled) injection = nullptr;
  if (injection != nullptr && injection->n() != graph.n_nodes()) {
    fail(ErrorKind::dimension, "injection size does not match the graph");
  }
  // Built once, before the loop: held-out edges never reach the model.
  const Matrix train_adjacency = cfg.no_edges_mode ? Matrix(graph.n_nodes(), graph.n_nodes())
                                                   : adjacency_from_edges(graph.n_nodes(), split.train_edges);

  return detail::run_training(model, injection, cfg, [&](Tape& tape) {
    Var x = tape.constant(graph.features);
    Var a = tape.constant(train_adjacency);
    Var a_hat = injection != nullptr ? inject(a, tape.leaf(injection->j), injection->symmetric) : a;
    Var s = forward_link_pred(model, x, a_hat);
    std::vector<Var> terms{link_pred_loss(a, s, cfg.lambda_score), detail::weight_penalty(tape, model, cfg.lambda_weights)};
    if (injection != nullptr) terms.push_back(injection_penalty(tape.leaf(injection->j), cfg.lambda_injection));
    const double metric = link_pred_report(s.value(), split.test_pos_edges, split.test_neg_edges, 0.5).accuracy;
    return std::pair{add_scalars(terms), metric};
  });
}

/// Copies the best-validation weights (and J) back into the live objects.
inline void restore_best(const TrainState& state, Model& model, InjectionParam* injection) {
  if (state.best_weights.size() == model.weights.size()) {
    for (std::size_t w = 0; w < model.weights.size(); ++w) model.weights[w].value = state.best_weights[w];
  }
  if (injection != nullptr && state.best_injection) injection->j.value = *state.best_injection;
}

/// Forward pass without gradient bookkeeping for evaluation.
inline Matrix predict_node_logits(const Graph& graph, Model& model, const InjectionParam* injection, bool no_edges) {
  Tape tape;
  const Matrix adjacency = no_edges ? Matrix(graph.n_nodes(), graph.n_nodes()) : graph.adjacency;
  Var a = tape.constant(adjacency);
  if (injection != nullptr) a = inject(a, tape.constant(injection->j.value), injection->symmetric);
  return forward_node_clf(model, tape.constant(graph.features), a).value();
}

inline Matrix predict_link_scores(const Graph& graph, const Matrix& train_adjacency, Model& model,
                                  const InjectionParam* injection) {
  Tape tape;
  Var a = tape.constant(train_adjacency);
  if (injection != nullptr) a = inject(a, tape.constant(injection->j.value), injection->symmetric);
  return forward_link_pred(model, tape.constant(graph.features), a).value();
}

}  // namespace linkforge
