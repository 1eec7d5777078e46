#pragma once

// Command implementations behind the `linkforge` executable. Kept in the
// library so tests can drive them without spawning processes.

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "linkforge/checkpoint.hpp"
#include "linkforge/config.hpp"
#include "linkforge/data_io.hpp"
#include "linkforge/injection.hpp"
#include "linkforge/metrics.hpp"
#include "linkforge/models.hpp"
#include "linkforge/reports.hpp"
#include "linkforge/training.hpp"

namespace linkforge {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitDivergence = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
      return kExitConfig;
    case ErrorKind::divergence:
    case ErrorKind::non_finite:
      return kExitDivergence;
    default:
      return kExitData;
  }
}

/// Per-metric mean, sample standard deviation (n - 1) and best across seeds.
struct AggregateReport {
  struct Row {
    std::string metric;
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;
    double best = 0.0;
  };
  std::vector<std::string> run_ids;
  std::vector<Row> rows;

  std::string to_csv() const {
    std::string out = "metric,n,mean,std,best";
    for (const std::string& id : run_ids) out += ",seed_" + id;
    out += "\n";
    for (const Row& r : rows) {
      out += r.metric + "," + std::to_string(r.values.size()) + "," + format_real(r.mean) + "," +
             format_real(r.stddev) + "," + format_real(r.best);
      for (double v : r.values) out += "," + format_real(v);
      out += "\n";
    }
    return out;
  }
};

inline AggregateReport::Row summarize(const std::string& metric, std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "aggregate over no runs");
  AggregateReport::Row row;
  row.metric = metric;
  double sum = 0.0;
  for (double v : values) sum += v;
  row.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - row.mean) * (v - row.mean);
  row.stddev = values.size() > 1 ? std::sqrt(sq / static_cast<double>(values.size() - 1)) : 0.0;
  row.best = *std::max_element(values.begin(), values.end());
  row.values = std::move(values);
  return row;
}

/// Aggregates every metric that has a numeric value in all runs; keys keep
/// the order of the first report.
inline AggregateReport aggregate(const std::vector<std::string>& run_ids, const std::vector<KeyValueReport>& reports) {
  AggregateReport agg;
  agg.run_ids = run_ids;
  if (reports.empty()) return agg;
  for (const auto& [key, unused] : reports.front().entries()) {
    std::vector<double> values;
    for (const KeyValueReport& r : reports) {
      const auto v = r.get_number(key);
      if (!v) break;
      values.push_back(*v);
    }
    if (values.size() == reports.size()) agg.rows.push_back(summarize(key, std::move(values)));
  }
  return agg;
}

struct CommandResult {
  fs::path run_root;
  std::vector<KeyValueReport> reports;
  AggregateReport aggregate;
  int exit_code = kExitOk;
};

namespace detail {

inline Checkpoint make_checkpoint(const RunConfig& cfg, std::uint64_t seed, const Model& model,
                                  const InjectionParam* injection) {
  RunConfig echo = cfg;
  echo.seed = seed;
  echo.seeds = 1;
  Checkpoint ckpt;
  ckpt.config = echo.to_text();
  for (std::size_t w = 0; w < model.weights.size(); ++w) {
    ckpt.arrays.emplace_back("weight_" + std::to_string(w), model.weights[w].value);
  }
  if (injection != nullptr) ckpt.arrays.emplace_back("injection", injection->j.value);
  return ckpt;
}

inline std::string manifest_text(const RunConfig& cfg, std::uint64_t seed, const DatasetBundle& data,
                                 const std::string& status) {
  std::string m = "# config\n" + cfg.to_text();
  m += "# run\nrun_seed=" + std::to_string(seed) + "\n";
  m += "dataset_name=" + data.name + "\n";
  m += "dataset_hash=" + dataset_hash(data) + "\n";
  for (const auto& [file, hash] : data.provenance) m += "dataset_file." + file + "=" + hash + "\n";
  m += "status=" + status + "\n";
  return m;
}

inline std::size_t default_top_k(const RunConfig& cfg, const Graph& observed) {
  return cfg.top_k != 0 ? cfg.top_k : 2 * undirected_edges(observed.adjacency).size();
}

/// Ranked injections scored against the observed graph.
inline InjectionQualityReport evaluate_injection(const InjectionParam& param, const Graph& observed,
                                                 const std::vector<Edge>& train_edges, std::size_t k,
                                                 bool exclude_train, bool* truncated = nullptr) {
  const std::size_t n = observed.n_nodes();
  const PairSet observed_pairs = PairSet::from_edges(n, undirected_edges(observed.adjacency));
  const PairSet train_pairs = PairSet::from_edges(n, train_edges);
  const RankedInjections ranked = top_k_injections(param, k, exclude_train ? &train_pairs : nullptr);
  if (truncated != nullptr) *truncated = ranked.truncated;
  if (ranked.links.empty()) {
    InjectionQualityReport empty;
    empty.k = 0;
    return empty;
  }
  const std::vector<std::size_t> comps = connected_components(observed.adjacency);
  return injection_quality(ranked.links, observed_pairs, train_pairs, comps);
}

inline std::string split_csv(const LinkSplit& split) {
  std::string out = "kind,u,v\n";
  for (const Edge& e : split.train_edges) out += "train," + std::to_string(e.u) + "," + std::to_string(e.v) + "\n";
  for (const Edge& e : split.test_pos_edges) out += "test_pos," + std::to_string(e.u) + "," + std::to_string(e.v) + "\n";
  for (const Edge& e : split.test_neg_edges) out += "test_neg," + std::to_string(e.u) + "," + std::to_string(e.v) + "\n";
  return out;
}

inline std::string topk_csv(const InjectionParam& param, std::size_t k, const PairSet* exclude) {
  const RankedInjections ranked = top_k_injections(param, k, exclude);
  std::string out = "rank,i,j,score\n";
  for (std::size_t r = 0; r < ranked.links.size(); ++r) {
    const RankedLink& l = ranked.links[r];
    out += std::to_string(r + 1) + "," + std::to_string(l.i) + "," + std::to_string(l.j) + "," + format_real(l.score) + "\n";
  }
  return out;
}

inline void report_training(KeyValueReport& report, const TrainState& state) {
  report.set("epochs_run", state.epoch);
  report.set("best_epoch", state.best_epoch);
  report.set("best_val_metric", state.best_metric);
  report.set("stopped_early", std::string(state.stopped_early ? "true" : "false"));
}

// Train edges for injection scoring: what the model saw during training.
inline std::vector<Edge> seen_edges(const RunConfig& cfg, const Graph& graph, std::uint64_t seed) {
  if (cfg.no_edges) return {};
  if (cfg.task == "link_pred") return make_link_split(graph, cfg.train_fraction, seed).train_edges;
  return undirected_edges(graph.adjacency);
}

template <typename RunOne>
CommandResult run_seeds(const RunConfig& cfg, const DatasetBundle& data, std::ostream& log, RunOne run_one) {
  CommandResult result;
  result.run_root = fs::path(cfg.out) / cfg.run_name();
  std::vector<std::string> ids;
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = cfg.seed + s;
    const fs::path dir = result.run_root / std::to_string(seed);
    try {
      KeyValueReport report = run_one(seed, dir);
      write_file_atomic(dir / "manifest", manifest_text(cfg, seed, data, "ok"));
      export_report(report, dir / "report.txt");
      result.reports.push_back(std::move(report));
      ids.push_back(std::to_string(seed));
      log << "seed " << seed << ": done -> " << dir.string() << "\n";
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::divergence) throw;
      write_file_atomic(dir / "manifest", manifest_text(cfg, seed, data, std::string("diverged: ") + e.what()));
      log << "seed " << seed << ": " << e.what() << "\n";
      result.exit_code = kExitDivergence;
    }
  }
  result.aggregate = aggregate(ids, result.reports);
  if (!result.reports.empty()) write_file_atomic(result.run_root / "aggregate.csv", result.aggregate.to_csv());
  return result;
}

}  // namespace detail

/// Node classification for each seed; writes
/// <out>/<name>/<seed>/{manifest, epochs.csv, ckpt, report.txt} plus
/// injection exports when injection is on, then <out>/<name>/aggregate.csv.
inline CommandResult cmd_train_node(RunConfig cfg, std::ostream& log) {
  cfg.task = "node_clf";
  cfg.validate();
  const DatasetBundle data = load_dataset(cfg.dataset);
  const Graph& graph = data.graph;
  const LayerKind kind = parse_layer_kind(cfg.model);

  return detail::run_seeds(cfg, data, log, [&](std::uint64_t seed, const fs::path& dir) {
    const TrainConfig tc = cfg.train_config(seed);
    Model model = Model::make(kind, graph.n_features(), cfg.hidden, graph.n_classes, cfg.layers, seed);
    std::optional<InjectionParam> injection;
    if (cfg.inject) injection = InjectionParam::create(graph.n_nodes(), tc.injection_init, seed, cfg.symmetric);
    InjectionParam* inj = injection ? &*injection : nullptr;

    const TrainState state = cfg.no_edges && inj != nullptr ? run_no_edges_experiment(graph, data.masks, model, inj, tc)
                                                            : train_node_clf(graph, data.masks, model, inj, tc);
    restore_best(state, model, inj);
    const Matrix logits = predict_node_logits(graph, model, inj, cfg.no_edges);

    KeyValueReport report = to_report(classification_report(logits, graph.labels, data.masks.test));
    detail::report_training(report, state);
    write_file_atomic(dir / "epochs.csv", epochs_csv(state));
    save_checkpoint(detail::make_checkpoint(cfg, seed, model, inj), dir / "ckpt");
    if (inj != nullptr) {
      const std::size_t k = detail::default_top_k(cfg, graph);
      const auto quality = detail::evaluate_injection(*inj, graph, detail::seen_edges(cfg, graph, seed), k, cfg.exclude_train);
      report.merge(to_report(quality), "injection.");
      export_injection(state, *inj, dir);
    }
    return report;
  });
}

/// Link prediction for each seed (fresh edge split per seed); additionally
/// writes split.csv and topk.csv.
inline CommandResult cmd_train_link(RunConfig cfg, std::ostream& log) {
  cfg.task = "link_pred";
  cfg.validate();
  const DatasetBundle data = load_dataset(cfg.dataset);
  const Graph& graph = data.graph;
  const LayerKind kind = parse_layer_kind(cfg.model);

  return detail::run_seeds(cfg, data, log, [&](std::uint64_t seed, const fs::path& dir) {
    const TrainConfig tc = cfg.train_config(seed);
    const LinkSplit split = make_link_split(graph, cfg.train_fraction, seed);
    Model model = Model::make(kind, graph.n_features(), cfg.hidden, cfg.embedding, cfg.layers, seed);
    std::optional<InjectionParam> injection;
    if (cfg.inject) injection = InjectionParam::create(graph.n_nodes(), tc.injection_init, seed, cfg.symmetric);
    InjectionParam* inj = injection ? &*injection : nullptr;

    const TrainState state = train_link_pred(graph, split, model, inj, tc);
    restore_best(state, model, inj);
    const Matrix train_adjacency = cfg.no_edges ? Matrix(graph.n_nodes(), graph.n_nodes())
                                                : adjacency_from_edges(graph.n_nodes(), split.train_edges);
    const Matrix scores = predict_link_scores(graph, train_adjacency, model, inj);

    KeyValueReport report = to_report(link_pred_report(scores, split.test_pos_edges, split.test_neg_edges, 0.5));
    report.set("negatives", std::string("balanced"));
    detail::report_training(report, state);
    write_file_atomic(dir / "epochs.csv", epochs_csv(state));
    write_file_atomic(dir / "split.csv", detail::split_csv(split));
    save_checkpoint(detail::make_checkpoint(cfg, seed, model, inj), dir / "ckpt");
    if (inj != nullptr) {
      const std::size_t k = detail::default_top_k(cfg, graph);
      const std::vector<Edge> seen = detail::seen_edges(cfg, graph, seed);
      const auto quality = detail::evaluate_injection(*inj, graph, seen, k, cfg.exclude_train);
      report.merge(to_report(quality), "injection.");
      const PairSet seen_pairs = PairSet::from_edges(graph.n_nodes(), seen);
      write_file_atomic(dir / "topk.csv", detail::topk_csv(*inj, k, cfg.exclude_train ? &seen_pairs : nullptr));
      export_injection(state, *inj, dir);
    }
    return report;
  });
}

struct EvalInjectionResult {
  InjectionQualityReport report;
  bool truncated = false;
};

/// Recomputes injection quality offline from a checkpoint's J.
inline EvalInjectionResult cmd_eval_injection(const fs::path& checkpoint, const fs::path& dataset,
                                              std::optional<std::size_t> k, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RunConfig cfg = RunConfig::parse(ckpt.config, "checkpoint config");
  const DatasetBundle data = load_dataset(dataset);
  const Matrix* j = ckpt.find("injection");
  if (j == nullptr) fail(ErrorKind::checkpoint, "checkpoint holds no injection matrix (baseline run?)");
  if (j->rows() != data.graph.n_nodes() || j->cols() != data.graph.n_nodes()) {
    fail(ErrorKind::checkpoint, "injection " + j->shape() + " does not match " + std::to_string(data.graph.n_nodes()) +
                                    "-node dataset");
  }
  InjectionParam param;
  param.j = Tensor(*j, false);
  param.symmetric = cfg.symmetric;
  EvalInjectionResult out;
  const std::size_t top = k.value_or(detail::default_top_k(cfg, data.graph));
  out.report = detail::evaluate_injection(param, data.graph, detail::seen_edges(cfg, data.graph, cfg.seed), top,
                                          cfg.exclude_train, &out.truncated);
  if (out.truncated) {
    log << "warning: only " << out.report.k << " positive injections available for k=" << top << "\n";
  }
  return out;
}

/// Dataset statistics in the layout of a dataset summary table.
inline std::string cmd_dataset_stats(const fs::path& dataset) {
  const DatasetBundle data = load_dataset(dataset);
  const Graph& g = data.graph;
  const DegreeStats deg = degree_stats(g.adjacency);
  const std::size_t edges = undirected_edges(g.adjacency).size();
  char row[256];
  std::snprintf(row, sizeof row, "%-12s %9zu %8zu %15zu %8zu   (%zu, %zu, %ld)\n", data.name.c_str(), g.n_classes,
                g.n_nodes(), g.n_features(), edges, deg.min, deg.max, std::lround(deg.avg));
  return std::string("DATASET       #CLASSES   #NODES  #NODE FEATURES   #EDGES   #DEGREE(min, max, avg)\n") + row;
}

inline fs::path cmd_gen_sbm(const SbmSpec& spec, const fs::path& out) {
  export_dataset(generate_sbm(spec), out);
  return out;
}

}  // namespace linkforge
