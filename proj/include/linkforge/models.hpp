#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "linkforge/error.hpp"
#include "linkforge/graph.hpp"
#include "linkforge/rng.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

enum class LayerKind { gcn, sage_mean, simple };
enum class Activation { relu, none };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::gcn: return "gcn";
    case LayerKind::sage_mean: return "sage";
    case LayerKind::simple: return "gnn";
  }
  return "?";
}

inline LayerKind parse_layer_kind(const std::string& name) {
  if (name == "gcn") return LayerKind::gcn;
  if (name == "sage") return LayerKind::sage_mean;
  if (name == "gnn") return LayerKind::simple;
  fail(ErrorKind::config, "unknown model '" + name + "' (expected gcn, sage or gnn)");
}

struct LayerSpec {
  LayerKind kind = LayerKind::gcn;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::relu;
};

inline Var activate(const Var& x, Activation act) { return act == Activation::relu ? relu(x) : x; }

// act(a_norm (h w)); associating as a_norm (h w) keeps the N x N product
// against the narrow side.
inline Var gcn_layer_forward(const Var& a_norm, const Var& h, const Var& w, Activation act) {
  return activate(matmul(a_norm, matmul(h, w)), act);
}

inline Var sage_layer_forward(const Var& a_rownorm, const Var& h, const Var& w_self, const Var& w_neigh,
                              Activation act) {
  return activate(add(matmul(h, w_self), matmul(a_rownorm, matmul(h, w_neigh))), act);
}

/// act((A' + I) h w); `a_prime` is the unnormalized injected adjacency.
inline Var simple_gnn_layer_forward(const Var& a_prime, const Var& h, const Var& w, Activation act) {
  Tape& t = detail::tape_of(a_prime);
  Var with_self = add(a_prime, t.constant(Matrix::identity(a_prime.rows())));
  return activate(matmul(with_self, matmul(h, w)), act);
}

/// Layer stack shared by every predictor. Weights are Glorot-uniform from
/// the recorded seed; sage layers own two matrices (self, neighbour).
struct Model {
  LayerKind kind = LayerKind::gcn;
  std::vector<LayerSpec> layers;
  std::vector<Tensor> weights;
  std::uint64_t seed = 0;

  static Model make(LayerKind kind, std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                    std::size_t n_layers = 2, std::uint64_t seed = 0) {
    if (in_dim == 0 || hidden_dim == 0 || out_dim == 0 || n_layers == 0) {
      fail(ErrorKind::config, "model dimensions and depth must be positive");
    }
    Model m;
    m.kind = kind;
    m.seed = seed;
    std::size_t prev = in_dim;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const bool last = l + 1 == n_layers;
      const std::size_t out = last ? out_dim : hidden_dim;
      m.layers.push_back({kind, prev, out, last ? Activation::none : Activation::relu});
      prev = out;
    }
    Rng rng = Rng(seed).split(0x3e1647);
    for (const LayerSpec& spec : m.layers) {
      const std::size_t count = kind == LayerKind::sage_mean ? 2 : 1;
      for (std::size_t c = 0; c < count; ++c) m.weights.emplace_back(glorot(spec.in_dim, spec.out_dim, rng), true);
    }
    return m;
  }

  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

  static Matrix glorot(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
  }

  void zero_grad() {
    for (Tensor& w : weights) w.zero_grad();
  }
};

/// Propagation matrix each layer kind consumes: gcn -> symmetric
/// normalization, sage -> row normalization, simple -> raw A'.
inline Var propagation_matrix(LayerKind kind, const Var& a_injected) {
  switch (kind) {
    case LayerKind::gcn: return gcn_normalize(a_injected);
    case LayerKind::sage_mean: return row_normalize(a_injected);
    case LayerKind::simple: return a_injected;
  }
  return a_injected;
}

/// Runs the layer stack; returns the last layer's output (logits or
/// embeddings) without a final activation.
inline Var forward_layers(Model& model, const Var& features, const Var& a_injected) {
  Tape& t = detail::tape_of(features);
  if (features.cols() != model.layers.front().in_dim) {
    fail(ErrorKind::dimension, "model expects " + std::to_string(model.layers.front().in_dim) +
                                   " input features, got " + features.value().shape());
  }
  if (a_injected.rows() != features.rows()) {
    fail(ErrorKind::dimension, "adjacency " + a_injected.value().shape() + " vs features " + features.value().shape());
  }
  const Var prop = propagation_matrix(model.kind, a_injected);
  Var h = features;
  std::size_t w = 0;
  for (const LayerSpec& spec : model.layers) {
    switch (spec.kind) {
      case LayerKind::gcn:
        h = gcn_layer_forward(prop, h, t.leaf(model.weights[w++]), spec.activation);
        break;
      case LayerKind::sage_mean: {
        Var w_self = t.leaf(model.weights[w++]);
        Var w_neigh = t.leaf(model.weights[w++]);
        h = sage_layer_forward(prop, h, w_self, w_neigh, spec.activation);
        break;
      }
      case LayerKind::simple:
        h = simple_gnn_layer_forward(prop, h, t.leaf(model.weights[w++]), spec.activation);
        break;
    }
  }
  return h;
}

/// Logits S (N x C), not softmaxed.
inline Var forward_node_clf(Model& model, const Var& features, const Var& a_injected) {
  return forward_layers(model, features, a_injected);
}

/// Inner-product decoder: S = sigmoid(Z Z^T) over final-layer embeddings Z.
inline Var forward_link_pred(Model& model, const Var& features, const Var& a_injected) {
  Var z = forward_layers(model, features, a_injected);
  return sigmoid(matmul(z, transpose(z)));
}

}  // namespace linkforge
