#pragma once

// Run configuration: flat key=value text. Unknown keys are rejected; the
// serialized form parses back to an equal config.

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>

#include "linkforge/data_io.hpp"
#include "linkforge/error.hpp"
#include "linkforge/injection.hpp"
#include "linkforge/models.hpp"
#include "linkforge/training.hpp"

namespace linkforge {

struct RunConfig {
  std::string task = "node_clf";  // node_clf | link_pred
  std::string dataset;
  std::string out = "runs";
  std::string name;
  std::string model = "gcn";
  std::size_t epochs = 10000;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  bool inject = true;
  bool no_edges = false;
  std::size_t top_k = 0;  // 0: twice the observed edge count
  double train_fraction = 0.8;
  bool exclude_train = false;  // drop training edges from the injection ranking
  std::size_t hidden = 16;
  std::size_t embedding = 16;
  std::size_t layers = 2;
  double lr = 0.002;
  double lr_injection = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Per-model learning-rate overrides; applied when `model` matches.
  std::optional<double> gcn_lr, sage_lr, gnn_lr;
  double lambda = 1e-4;
  double lambda_w = 5e-4;
  double lambda_j = 5e-4;
  bool early_stopping = true;
  std::size_t window = 100;
  double tolerance = 0.005;
  std::size_t earliest = 5000;
  std::string init = "constant";  // constant | uniform
  double init_value = 0.01;
  double init_lo = 0.0;
  double init_hi = 0.01;
  bool symmetric = true;

  bool operator==(const RunConfig&) const = default;

  std::string run_name() const { return name.empty() ? (task == "link_pred" ? "link-" : "node-") + model : name; }

  double model_lr() const {
    const LayerKind kind = parse_layer_kind(model);
    if (kind == LayerKind::gcn && gcn_lr) return *gcn_lr;
    if (kind == LayerKind::sage_mean && sage_lr) return *sage_lr;
    if (kind == LayerKind::simple && gnn_lr) return *gnn_lr;
    return lr;
  }

  InjectionInit injection_init() const {
    InjectionInit i;
    if (init == "constant") {
      i.mode = InitMode::constant;
    } else if (init == "uniform") {
      i.mode = InitMode::uniform;
    } else {
      fail(ErrorKind::config, "init must be constant or uniform, got '" + init + "'");
    }
    i.value = init_value;
    i.lo = init_lo;
    i.hi = init_hi;
    return i;
  }

  TrainConfig train_config(std::uint64_t run_seed) const {
    TrainConfig c;
    c.task = task == "link_pred" ? Task::link_pred : Task::node_clf;
    c.max_epochs = epochs;
    c.optimizer = {model_lr(), beta1, beta2, eps};
    c.injection_optimizer = {lr_injection, beta1, beta2, eps};
    c.lambda_score = lambda;
    c.lambda_weights = lambda_w;
    c.lambda_injection = lambda_j;
    c.early_stop = {window, tolerance, earliest};
    c.early_stopping = early_stopping;
    c.injection_enabled = inject;
    c.no_edges_mode = no_edges;
    c.symmetric_injection = symmetric;
    c.injection_init = injection_init();
    c.seed = run_seed;
    return c;
  }

  void validate() const {
    if (task != "node_clf" && task != "link_pred") fail(ErrorKind::config, "task must be node_clf or link_pred");
    parse_layer_kind(model);
    injection_init();
    if (seeds == 0) fail(ErrorKind::config, "seeds must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorKind::config, "train_fraction must lie in (0, 1)");
    if (no_edges && !inject && task == "link_pred") fail(ErrorKind::config, "no_edges needs injection for link prediction");
    train_config(seed).validate();
  }

  template <typename Self, typename Visitor>
  static void fields(Self& s, Visitor&& v) {
    v("task", s.task);
    v("dataset", s.dataset);
    v("out", s.out);
    v("name", s.name);
    v("model", s.model);
    v("epochs", s.epochs);
    v("seed", s.seed);
    v("seeds", s.seeds);
    v("inject", s.inject);
    v("no_edges", s.no_edges);
    v("top_k", s.top_k);
    v("train_fraction", s.train_fraction);
    v("exclude_train", s.exclude_train);
    v("hidden", s.hidden);
    v("embedding", s.embedding);
    v("layers", s.layers);
    v("lr", s.lr);
    v("lr_injection", s.lr_injection);
    v("beta1", s.beta1);
    v("beta2", s.beta2);
    v("eps", s.eps);
    v("gcn.lr", s.gcn_lr);
    v("sage.lr", s.sage_lr);
    v("gnn.lr", s.gnn_lr);
    v("lambda", s.lambda);
    v("lambda_w", s.lambda_w);
    v("lambda_j", s.lambda_j);
    v("early_stopping", s.early_stopping);
    v("window", s.window);
    v("tolerance", s.tolerance);
    v("earliest", s.earliest);
    v("init", s.init);
    v("init_value", s.init_value);
    v("init_lo", s.init_lo);
    v("init_hi", s.init_hi);
    v("symmetric", s.symmetric);
  }

  std::string to_text() const {
    std::string out;
    fields(*this, [&](const char* key, auto& field) {
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_same_v<T, std::optional<double>>) {
        if (field) out += std::string(key) + "=" + format_real(*field) + "\n";
      } else {
        out += std::string(key) + "=" + render(field) + "\n";
      }
    });
    return out;
  }

  /// Applies key=value lines on top of the current values.
  void apply_text(const std::string& text, const std::string& source = "config") {
    std::size_t ln = 0;
    for (const std::string& raw : detail::split_lines(text)) {
      ++ln;
      const std::string line = detail::trim(raw);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        fail(ErrorKind::config, source + ":" + std::to_string(ln) + ": expected key=value");
      }
      set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), source + ":" + std::to_string(ln));
    }
  }

  void set(const std::string& key, const std::string& value, const std::string& where = "flag") {
    bool found = false;
    fields(*this, [&](const char* k, auto& field) {
      if (key != k) return;
      found = true;
      assign(field, value, where + ": key '" + key + "'");
    });
    if (!found) fail(ErrorKind::config, where + ": unknown key '" + key + "'");
  }

  static RunConfig parse(const std::string& text, const std::string& source = "config") {
    RunConfig c;
    c.apply_text(text, source);
    return c;
  }

 private:
  static std::string render(const std::string& s) { return s; }
  static std::string render(bool b) { return b ? "true" : "false"; }
  static std::string render(double d) { return format_real(d); }
  static std::string render(std::size_t n) { return std::to_string(n); }

  static void assign(std::string& field, const std::string& v, const std::string&) { field = v; }
  static void assign(bool& field, const std::string& v, const std::string& ctx) {
    if (v == "true" || v == "1" || v == "yes") {
      field = true;
    } else if (v == "false" || v == "0" || v == "no") {
      field = false;
    } else {
      fail(ErrorKind::config, ctx + ": expected a boolean, got '" + v + "'");
    }
  }
  static void assign(double& field, const std::string& v, const std::string& ctx) {
    try {
      std::size_t used = 0;
      field = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, ctx + ": expected a number, got '" + v + "'");
    }
  }
  static void assign(std::optional<double>& field, const std::string& v, const std::string& ctx) {
    double d = 0.0;
    assign(d, v, ctx);
    field = d;
  }
  static void assign(std::size_t& field, const std::string& v, const std::string& ctx) {
    unsigned long long n = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      fail(ErrorKind::config, ctx + ": expected a non-negative integer, got '" + v + "'");
    }
    field = static_cast<std::size_t>(n);
  }
};

}  // namespace linkforge
