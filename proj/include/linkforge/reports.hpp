#pragma once

// Flat text serialization of metric reports, per-epoch logs and injection
// exports. Reals use %.17g so every value round-trips exactly.

#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linkforge/data_io.hpp"
#include "linkforge/injection.hpp"
#include "linkforge/metrics.hpp"
#include "linkforge/training.hpp"

namespace linkforge {

/// Ordered key=value pairs; "absent" marks a metric with no value.
class KeyValueReport {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_real(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, const std::optional<double>& value) {
    set(key, value ? format_real(*value) : std::string("absent"));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return std::nullopt;
  }

  std::optional<double> get_real(const std::string& key) const {
    auto v = get(key);
    if (!v || *v == "absent") return std::nullopt;
    return std::stod(*v);
  }

  /// Like get_real, but non-numeric values (flags, names) also yield nullopt.
  std::optional<double> get_number(const std::string& key) const {
    auto v = get(key);
    if (!v || v->empty()) return std::nullopt;
    double out = 0.0;
    const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || end != v->data() + v->size()) return std::nullopt;
    return out;
  }

  void merge(const KeyValueReport& other, const std::string& prefix = "") {
    for (const auto& [k, v] : other.entries_) set(prefix + k, v);
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

  /// CSV rows `run_id,metric,value`.
  std::string to_csv(const std::string& run_id, bool header = true) const {
    std::string out = header ? "run_id,metric,value\n" : "";
    for (const auto& [k, v] : entries_) out += run_id + "," + k + "," + v + "\n";
    return out;
  }

  static KeyValueReport parse(const std::string& text) {
    KeyValueReport r;
    std::size_t ln = 0;
    for (const std::string& line : detail::split_lines(text)) {
      ++ln;
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) detail::format_error("report", ln, "expected key=value");
      r.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return r;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline KeyValueReport to_report(const ClassificationReport& r) {
  KeyValueReport kv;
  kv.set("accuracy_macro", r.accuracy_macro);
  kv.set("auc_roc_macro", r.auc_roc_macro);
  for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c) {
    kv.set("class_" + std::to_string(c) + "_accuracy", r.per_class_accuracy[c]);
  }
  return kv;
}

inline KeyValueReport to_report(const LinkPredReport& r) {
  KeyValueReport kv;
  kv.set("accuracy", r.accuracy);
  kv.set("precision", r.precision);
  kv.set("recall", r.recall);
  kv.set("threshold", r.threshold);
  kv.set("tp", r.tp);
  kv.set("fp", r.fp);
  kv.set("tn", r.tn);
  kv.set("fn", r.fn);
  return kv;
}

inline KeyValueReport to_report(const InjectionQualityReport& r) {
  KeyValueReport kv;
  kv.set("k", r.k);
  kv.set("hits_total", r.hits_total);
  kv.set("hits_not_in_train", r.hits_not_in_train);
  kv.set("hit_rate_total", r.hit_rate_total);
  kv.set("hit_rate_not_in_train", r.hit_rate_not_in_train);
  kv.set("mean_rank", r.mean_rank);
  kv.set("mr_ratio", r.mr_ratio);
  kv.set("neighbor_fraction", r.neighbor_fraction);
  kv.set("disconnected_fraction", r.disconnected_fraction);
  return kv;
}

inline void export_report(const KeyValueReport& report, const fs::path& path) {
  write_file_atomic(path, report.to_text());
}

inline KeyValueReport read_report(const fs::path& path) { return KeyValueReport::parse(read_file(path)); }

inline std::string epochs_csv(const TrainState& state) {
  std::string out = "epoch,train_loss,val_metric,inj_total,inj_nonzero\n";
  for (const EpochRecord& r : state.history) {
    out += std::to_string(r.epoch) + "," + format_real(r.train_loss) + "," + format_real(r.val_metric) + "," +
           format_real(r.inj_total) + "," + std::to_string(r.inj_nonzero) + "\n";
  }
  return out;
}

inline std::string snapshot_series_csv(const TrainState& state) {
  std::string out = "epoch,total,nonzero_count\n";
  auto row = [&](std::size_t epoch, double total, std::size_t nz) {
    out += std::to_string(epoch) + "," + format_real(total) + "," + std::to_string(nz) + "\n";
  };
  if (state.initial_snapshot) row(0, state.initial_snapshot->total, state.initial_snapshot->nonzero_count);
  for (const EpochRecord& r : state.history) row(r.epoch, r.inj_total, r.inj_nonzero);
  return out;
}

inline std::string histogram_csv(const InjectionSnapshot& snap) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < InjectionSnapshot::kBins; ++b) {
    out += format_real(snap.bin_lo(b)) + "," + format_real(snap.bin_hi(b)) + "," + std::to_string(snap.histogram[b]) + "\n";
  }
  return out;
}

/// (i, j, score) for every positive effective injection, descending.
inline std::string injection_matrix_csv(const InjectionParam& param) {
  const RankedInjections all = top_k_injections(param, param.n() * param.n());
  std::string out = "i,j,score\n";
  for (const RankedLink& l : all.links) {
    out += std::to_string(l.i) + "," + std::to_string(l.j) + "," + format_real(l.score) + "\n";
  }
  return out;
}

/// Writes injection_series.csv, injection_histogram.csv and injections.csv into `dir`.
inline void export_injection(const TrainState& state, const InjectionParam& param, const fs::path& dir) {
  write_file_atomic(dir / "injection_series.csv", snapshot_series_csv(state));
  const InjectionSnapshot final_snap = state.final_snapshot ? *state.final_snapshot : snapshot(param, state.epoch);
  write_file_atomic(dir / "injection_histogram.csv", histogram_csv(final_snap));
  write_file_atomic(dir / "injections.csv", injection_matrix_csv(param));
}

}  // namespace linkforge
