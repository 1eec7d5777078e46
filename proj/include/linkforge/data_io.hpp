#pragma once

// Dataset directory format (UTF-8, LF):
//   meta.txt     n_nodes=<N> / n_features=<D> / n_classes=<C>, one per line
//   features.csv N lines of D comma-separated reals
//   edges.csv    one "src,dst" pair per line, 0-based, either orientation
//   labels.csv   N lines, one integer class each
//   splits.json  {"train": [...], "val": [...], "test": [...], "train_fraction": f?}

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "linkforge/error.hpp"
#include "linkforge/graph.hpp"
#include "linkforge/rng.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

namespace fs = std::filesystem;

struct DatasetBundle {
  Graph graph;
  SplitMasks masks;
  std::string name;
  std::optional<double> train_fraction;
  std::map<std::string, std::string> provenance;  // file name -> content hash
};

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// git blob id: SHA-1 over "blob <size>\0" followed by the bytes.
inline std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) fail(ErrorKind::io, "cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) fail(ErrorKind::io, "SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::io, "cannot move output into " + path.string());
  }
}

namespace detail {

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void format_error(const std::string& file, std::size_t line, const std::string& what) {
  fail(ErrorKind::format, file + ":" + std::to_string(line) + ": " + what);
}

inline double parse_real(const std::string& tok, const std::string& file, std::size_t line) {
  const std::string t = trim(tok);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) format_error(file, line, "bad number '" + t + "'");
    return v;
  } catch (const std::logic_error&) {
    format_error(file, line, "bad number '" + t + "'");
  }
}

inline long long parse_int(const std::string& tok, const std::string& file, std::size_t line) {
  const std::string t = trim(tok);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) format_error(file, line, "bad integer '" + t + "'");
  return v;
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return out;
}

inline NodeMask mask_from_json(const nlohmann::json& doc, const char* key, std::size_t n) {
  NodeMask mask(n, false);
  if (!doc.contains(key)) return mask;
  if (!doc[key].is_array()) fail(ErrorKind::format, std::string("splits.json: '") + key + "' must be an array");
  for (const auto& v : doc[key]) {
    if (!v.is_number_integer()) fail(ErrorKind::format, std::string("splits.json: non-integer index in '") + key + "'");
    const auto idx = v.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
      fail(ErrorKind::integrity, std::string("splits.json: index ") + std::to_string(idx) + " in '" + key +
                                     "' outside " + std::to_string(n) + " nodes");
    }
    mask[static_cast<std::size_t>(idx)] = true;
  }
  return mask;
}

}  // namespace detail

/// Loads a dataset directory. The adjacency is symmetrized and self loops
/// are dropped; counts are validated against meta.txt.
inline DatasetBundle load_dataset(const fs::path& dir) {
  auto need = [&](const char* name) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) fail(ErrorKind::io, "missing dataset file " + p.string());
    return p;
  };
  const fs::path meta_path = need("meta.txt");
  const fs::path features_path = need("features.csv");
  const fs::path edges_path = need("edges.csv");
  const fs::path labels_path = need("labels.csv");
  const fs::path splits_path = need("splits.json");

  DatasetBundle bundle;
  bundle.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();

  const std::string meta_text = read_file(meta_path);
  std::map<std::string, long long> meta;
  {
    const auto lines = detail::split_lines(meta_text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (detail::trim(lines[ln]).empty()) continue;
      const auto eq = lines[ln].find('=');
      if (eq == std::string::npos) detail::format_error("meta.txt", ln + 1, "expected key=value");
      const std::string key = detail::trim(lines[ln].substr(0, eq));
      if (key != "n_nodes" && key != "n_features" && key != "n_classes") {
        detail::format_error("meta.txt", ln + 1, "unknown key '" + key + "'");
      }
      const long long v = detail::parse_int(lines[ln].substr(eq + 1), "meta.txt", ln + 1);
      if (v < 0) detail::format_error("meta.txt", ln + 1, "negative count");
      meta[key] = v;
    }
    for (const char* key : {"n_nodes", "n_features", "n_classes"}) {
      if (!meta.count(key)) fail(ErrorKind::format, std::string("meta.txt: missing ") + key);
    }
  }
  const auto n = static_cast<std::size_t>(meta["n_nodes"]);
  const auto d = static_cast<std::size_t>(meta["n_features"]);
  const auto c = static_cast<std::size_t>(meta["n_classes"]);

  const std::string features_text = read_file(features_path);
  {
    const auto lines = detail::split_lines(features_text);
    if (lines.size() != n) {
      detail::format_error("features.csv", std::min(lines.size(), n) + 1,
                           "expected " + std::to_string(n) + " rows, found " + std::to_string(lines.size()));
    }
    bundle.graph.features = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cells = detail::split_commas(lines[i]);
      if (cells.size() != d && !(d == 0 && cells.size() == 1 && detail::trim(cells[0]).empty())) {
        detail::format_error("features.csv", i + 1,
                             "expected " + std::to_string(d) + " values, found " + std::to_string(cells.size()));
      }
      for (std::size_t j = 0; j < d; ++j) {
        bundle.graph.features(i, j) = detail::parse_real(cells[j], "features.csv", i + 1);
      }
    }
  }

  const std::string labels_text = read_file(labels_path);
  {
    const auto lines = detail::split_lines(labels_text);
    if (lines.size() != n) {
      detail::format_error("labels.csv", std::min(lines.size(), n) + 1,
                           "expected " + std::to_string(n) + " labels, found " + std::to_string(lines.size()));
    }
    bundle.graph.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const long long y = detail::parse_int(lines[i], "labels.csv", i + 1);
      if (y < 0 || static_cast<std::size_t>(y) >= c) {
        detail::format_error("labels.csv", i + 1, "label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
      }
      bundle.graph.labels[i] = static_cast<int>(y);
    }
    bundle.graph.n_classes = c;
  }

  const std::string edges_text = read_file(edges_path);
  {
    bundle.graph.adjacency = Matrix(n, n);
    const auto lines = detail::split_lines(edges_text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (detail::trim(lines[ln]).empty()) continue;
      const auto cells = detail::split_commas(lines[ln]);
      if (cells.size() != 2) detail::format_error("edges.csv", ln + 1, "expected src,dst");
      const long long u = detail::parse_int(cells[0], "edges.csv", ln + 1);
      const long long v = detail::parse_int(cells[1], "edges.csv", ln + 1);
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
        fail(ErrorKind::integrity, "edges.csv:" + std::to_string(ln + 1) + ": edge " + std::to_string(u) + "," +
                                       std::to_string(v) + " references a node outside [0, " + std::to_string(n) + ")");
      }
      if (u == v) continue;
      bundle.graph.adjacency(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) = 1.0;
      bundle.graph.adjacency(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) = 1.0;
    }
  }

  const std::string splits_text = read_file(splits_path);
  {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(splits_text);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::format, std::string("splits.json: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::format, "splits.json must hold an object");
    bundle.masks.train = detail::mask_from_json(doc, "train", n);
    bundle.masks.val = detail::mask_from_json(doc, "val", n);
    bundle.masks.test = detail::mask_from_json(doc, "test", n);
    if (doc.contains("train_fraction")) {
      if (!doc["train_fraction"].is_number()) fail(ErrorKind::format, "splits.json: train_fraction must be a number");
      bundle.train_fraction = doc["train_fraction"].get<double>();
    }
    bundle.masks.validate(n);
  }

  bundle.provenance["meta.txt"] = git_blob_hash(meta_text);
  bundle.provenance["features.csv"] = git_blob_hash(features_text);
  bundle.provenance["edges.csv"] = git_blob_hash(edges_text);
  bundle.provenance["labels.csv"] = git_blob_hash(labels_text);
  bundle.provenance["splits.json"] = git_blob_hash(splits_text);
  bundle.graph.validate();
  return bundle;
}

/// Single hash over all provenance entries (stable key order).
inline std::string dataset_hash(const DatasetBundle& bundle) {
  std::string joined;
  for (const auto& [file, hash] : bundle.provenance) joined += file + ' ' + hash + '\n';
  return git_blob_hash(joined);
}

inline void export_dataset(const DatasetBundle& bundle, const fs::path& dir) {
  const Graph& g = bundle.graph;
  const std::size_t n = g.n_nodes();
  write_file_atomic(dir / "meta.txt", "n_nodes=" + std::to_string(n) + "\nn_features=" + std::to_string(g.n_features()) +
                                          "\nn_classes=" + std::to_string(g.n_classes) + "\n");
  std::string features;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g.n_features(); ++j) {
      if (j) features += ',';
      features += format_real(g.features(i, j));
    }
    features += '\n';
  }
  write_file_atomic(dir / "features.csv", features);
  std::string edges;
  for (const Edge& e : undirected_edges(g.adjacency)) edges += std::to_string(e.u) + ',' + std::to_string(e.v) + '\n';
  write_file_atomic(dir / "edges.csv", edges);
  std::string labels;
  for (int y : g.labels) labels += std::to_string(y) + '\n';
  write_file_atomic(dir / "labels.csv", labels);

  nlohmann::ordered_json doc;
  auto indices = [](const NodeMask& m) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) out.push_back(i);
    return out;
  };
  doc["train"] = indices(bundle.masks.train);
  doc["val"] = indices(bundle.masks.val);
  doc["test"] = indices(bundle.masks.test);
  if (bundle.train_fraction) doc["train_fraction"] = *bundle.train_fraction;
  write_file_atomic(dir / "splits.json", doc.dump() + "\n");
}

struct SbmSpec {
  std::vector<std::size_t> block_sizes{20, 20};
  double p_intra = 0.5;
  double p_inter = 0.02;
  std::size_t feature_dim = 8;
  double feature_noise = 0.1;
  std::uint64_t seed = 0;
  // Per-block node split (not part of the block model itself).
  double train_fraction = 0.2;
  double val_fraction = 0.2;

  void validate() const {
    if (block_sizes.empty()) fail(ErrorKind::config, "SBM needs at least one block");
    if (!(0.0 <= p_inter && p_inter < p_intra && p_intra <= 1.0)) {
      fail(ErrorKind::config, "SBM probabilities need 0 <= p_inter < p_intra <= 1");
    }
    if (feature_dim < block_sizes.size()) fail(ErrorKind::config, "feature_dim must cover the block one-hot");
    if (feature_noise < 0.0) fail(ErrorKind::config, "feature noise must be non-negative");
    if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction < 1.0)) {
      fail(ErrorKind::config, "SBM split fractions must leave room for a test split");
    }
  }
};

/// Block-structured random graph. Labels are block ids; features are the
/// one-hot block id plus Gaussian noise of scale `feature_noise`.
inline DatasetBundle generate_sbm(const SbmSpec& spec) {
  spec.validate();
  std::size_t n = 0;
  std::vector<int> block;
  for (std::size_t b = 0; b < spec.block_sizes.size(); ++b) {
    n += spec.block_sizes[b];
    block.insert(block.end(), spec.block_sizes[b], static_cast<int>(b));
  }
  DatasetBundle bundle;
  bundle.name = "sbm";
  Graph& g = bundle.graph;
  g.n_classes = spec.block_sizes.size();
  g.labels = block;
  g.adjacency = Matrix(n, n);
  Rng edge_rng = Rng(spec.seed).split(0xed9e);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block[i] == block[j] ? spec.p_intra : spec.p_inter;
      if (edge_rng.bernoulli(p)) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
    }
  }
  Rng feature_rng = Rng(spec.seed).split(0xfea7);
  g.features = Matrix(n, spec.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < spec.feature_dim; ++j) {
      g.features(i, j) = (static_cast<std::size_t>(block[i]) == j ? 1.0 : 0.0) + spec.feature_noise * feature_rng.normal();
    }
  }
  Rng split_rng = Rng(spec.seed).split(0x5b17);
  bundle.masks = {NodeMask(n, false), NodeMask(n, false), NodeMask(n, false)};
  std::size_t offset = 0;
  for (std::size_t size : spec.block_sizes) {
    std::vector<std::size_t> members(size);
    for (std::size_t k = 0; k < size; ++k) members[k] = offset + k;
    split_rng.shuffle(std::span<std::size_t>(members));
    const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.train_fraction * size)));
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * size));
    for (std::size_t k = 0; k < size; ++k) {
      NodeMask& m = k < n_train ? bundle.masks.train : (k < n_train + n_val ? bundle.masks.val : bundle.masks.test);
      m[members[k]] = true;
    }
    offset += size;
  }
  return bundle;
}

struct DroppedGraph {
  Graph graph;
  std::vector<Edge> dropped;
};

/// Removes the listed undirected edges; node features are untouched.
inline DroppedGraph drop_edges(const Graph& graph, const std::vector<Edge>& edges) {
  DroppedGraph out{graph, {}};
  for (const Edge& e : edges) {
    require_node(graph.adjacency, e.u);
    require_node(graph.adjacency, e.v);
    if (!(out.graph.adjacency(e.u, e.v) > 0.0)) {
      fail(ErrorKind::invalid_argument, "cannot drop non-edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ")");
    }
    out.graph.adjacency(e.u, e.v) = 0.0;
    out.graph.adjacency(e.v, e.u) = 0.0;
    out.dropped.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
  }
  std::sort(out.dropped.begin(), out.dropped.end());
  return out;
}

/// Drops round(fraction * |E|) uniformly chosen undirected edges.
inline DroppedGraph drop_edges(const Graph& graph, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) fail(ErrorKind::invalid_argument, "drop fraction must lie in [0, 1]");
  std::vector<Edge> edges = undirected_edges(graph.adjacency);
  Rng rng = Rng(seed).split(0xd209);
  rng.shuffle(std::span<Edge>(edges));
  edges.resize(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(edges.size()))));
  return drop_edges(graph, edges);
}

}  // namespace linkforge
