#pragma once

// Dense row-major matrices and a tape-based reverse-mode differentiation
// engine. Every differentiable computation in linkforge is recorded on a
// Tape as a sequence of nodes; Tape::backward replays the nodes in reverse.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linkforge/error.hpp"

namespace linkforge {

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorKind::dimension, "buffer of length " + std::to_string(data_.size()) +
                                     " cannot hold a " + shape_string(rows, cols) + " matrix");
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) fail(ErrorKind::dimension, "ragged matrix literal");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool is_scalar() const noexcept { return rows_ == 1 && cols_ == 1; }
  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  double scalar() const {
    if (!is_scalar()) fail(ErrorKind::dimension, "expected 1x1, got " + shape());
    return data_[0];
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(*this, o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  Matrix& operator*=(double c) {
    for (double& v : data_) v *= c;
    return *this;
  }

  bool operator==(const Matrix& o) const = default;

  std::string shape() const { return shape_string(rows_, cols_); }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
  }

  static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
      fail(ErrorKind::dimension, std::string(op) + ": shapes " + a.shape() + " and " + b.shape() +
                                     " differ");
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace kernels {

// c += op(a) * op(b); zero entries of a are skipped, which matters for the
// bag-of-words feature matrices and sparse adjacencies fed through here.
inline void gemm_accumulate(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t inner = trans_a ? a.rows() : a.cols();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (!trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* out = c.data().data() + i * n;
      for (std::size_t k = 0; k < inner; ++k) {
        const double aik = trans_a ? a(k, i) : a(i, k);
        if (aik == 0.0) continue;
        const double* brow = b.data().data() + k * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b.data().data() + j * inner;
        double s = 0.0;
        if (!trans_a) {
          const double* arow = a.data().data() + i * inner;
          for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
        } else {
          for (std::size_t k = 0; k < inner; ++k) s += a(k, i) * brow[k];
        }
        c(i, j) += s;
      }
    }
  }
}

}  // namespace kernels

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::dimension, "matmul: " + a.shape() + " x " + b.shape());
  }
  Matrix c(a.rows(), b.cols());
  kernels::gemm_accumulate(a, false, b, false, c);
  return c;
}

/// Tensor: a value plus an optional gradient buffer. Trainable parameters
/// (model weights, the injection matrix) live in Tensors that outlive any
/// single tape; Tape::leaf binds them for one forward/backward pass.
struct Tensor {
  Matrix value;
  bool requires_grad = false;
  std::optional<Matrix> grad;

  Tensor() = default;
  explicit Tensor(Matrix v, bool trainable = false) : value(std::move(v)), requires_grad(trainable) {}

  std::size_t rows() const noexcept { return value.rows(); }
  std::size_t cols() const noexcept { return value.cols(); }
  void zero_grad() { grad.reset(); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool attached() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient flowing into the node's output and pushes
  // contributions into its inputs through Tape::accumulate.
  using Backprop = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), {}, nullptr, false, nullptr); }

  /// Binds a persistent tensor. After backward(), its gradient is added
  /// into `tensor.grad` when `tensor.requires_grad` is set.
  Var leaf(Tensor& tensor) {
    return push(tensor.value, {}, nullptr, tensor.requires_grad, &tensor);
  }

  /// Records an op output. `value` must be finite; inputs must already be
  /// on this tape (which keeps nodes topologically ordered).
  Var record(Matrix value, std::vector<Var> inputs, Backprop backprop, const char* op) {
    if (!value.all_finite()) {
      fail(ErrorKind::non_finite, std::string(op) + " produced NaN/Inf (" + value.shape() + ")");
    }
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    bool needs = false;
    for (const Var& v : inputs) {
      check_owned(v, op);
      ids.push_back(v.id());
      needs = needs || nodes_[v.id()].needs_grad;
    }
    return push(std::move(value), std::move(ids), needs ? std::move(backprop) : nullptr, needs,
                nullptr);
  }

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(const Var& v) const { return nodes_.at(v.id()).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void accumulate(const Var& v, const Matrix& g) {
    Node& node = nodes_[v.id()];
    if (!node.needs_grad) return;
    if (!node.grad) {
      node.grad = g;
    } else {
      *node.grad += g;
    }
  }

  /// Reverse sweep from a scalar loss. Each node is visited exactly once,
  /// in reverse recording order.
  void backward(const Var& loss) {
    if (loss.tape() != this) fail(ErrorKind::tape, "loss was not recorded on this tape");
    if (!value(loss.id()).is_scalar()) {
      fail(ErrorKind::invalid_argument, "backward needs a scalar loss, got " + value(loss.id()).shape());
    }
    for (Node& n : nodes_) n.grad.reset();
    if (nodes_[loss.id()].needs_grad) nodes_[loss.id()].grad = Matrix(1, 1, 1.0);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.grad) continue;
      if (node.backprop) {
        // The closure may append to other nodes' grads but never to this one.
        const Matrix g = *node.grad;
        node.backprop(*this, g);
      }
      if (node.bound != nullptr && node.bound->requires_grad) {
        if (node.bound->grad) {
          *node.bound->grad += *node.grad;
        } else {
          node.bound->grad = *node.grad;
        }
      }
    }
  }

  /// Gradient of the most recent backward() w.r.t. any node (zeros if unreached).
  Matrix grad(const Var& v) const {
    const Node& node = nodes_.at(v.id());
    return node.grad ? *node.grad : Matrix(node.value.rows(), node.value.cols());
  }

 private:
  struct Node {
    Matrix value;
    std::vector<std::size_t> inputs;
    Backprop backprop;
    bool needs_grad = false;
    Tensor* bound = nullptr;
    std::optional<Matrix> grad;
  };

  Var push(Matrix value, std::vector<std::size_t> inputs, Backprop backprop, bool needs,
           Tensor* bound) {
    if (!value.all_finite()) fail(ErrorKind::non_finite, "tape input contains NaN/Inf");
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backprop), needs, bound, {}});
    return Var(this, nodes_.size() - 1);
  }

  void check_owned(const Var& v, const char* op) const {
    if (v.tape() != this) fail(ErrorKind::tape, std::string(op) + ": operand belongs to another tape");
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const {
  if (tape_ == nullptr) fail(ErrorKind::tape, "detached variable");
  return tape_->value(id_);
}

namespace detail {

inline Tape& tape_of(const Var& a) {
  if (!a.attached()) fail(ErrorKind::tape, "detached variable");
  return *a.tape();
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k]);
  return out;
}

// Elementwise local derivative times upstream gradient.
template <typename F>
Tape::Backprop unary_backprop(Var a, F local) {
  return [a, local](Tape& t, const Matrix& g) {
    const Matrix& x = a.value();
    Matrix ga(x.rows(), x.cols());
    for (std::size_t k = 0; k < x.size(); ++k) ga[k] = g[k] * local(x[k]);
    t.accumulate(a, ga);
  };
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a);
  Matrix c = matmul(a.value(), b.value());
  return t.record(std::move(c), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.needs_grad(a)) {
      Matrix ga(a.rows(), a.cols());
      kernels::gemm_accumulate(g, false, b.value(), true, ga);
      tape.accumulate(a, ga);
    }
    if (tape.needs_grad(b)) {
      Matrix gb(b.rows(), b.cols());
      kernels::gemm_accumulate(a.value(), true, g, false, gb);
      tape.accumulate(b, gb);
    }
  }, "matmul");
}

inline Var add(const Var& a, const Var& b) {
  Matrix::require_same_shape(a.value(), b.value(), "add");
  Matrix c = a.value();
  c += b.value();
  return detail::tape_of(a).record(std::move(c), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  }, "add");
}

inline Var sub(const Var& a, const Var& b) {
  Matrix::require_same_shape(a.value(), b.value(), "sub");
  Matrix c = a.value();
  for (std::size_t k = 0; k < c.size(); ++k) c[k] -= b.value()[k];
  return detail::tape_of(a).record(std::move(c), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    Matrix neg = g;
    neg *= -1.0;
    t.accumulate(b, neg);
  }, "sub");
}

inline Var hadamard(const Var& a, const Var& b) {
  Matrix::require_same_shape(a.value(), b.value(), "hadamard");
  Matrix c(a.rows(), a.cols());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = a.value()[k] * b.value()[k];
  return detail::tape_of(a).record(std::move(c), {a, b}, [a, b](Tape& t, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    Matrix gb(b.rows(), b.cols());
    for (std::size_t k = 0; k < g.size(); ++k) {
      ga[k] = g[k] * b.value()[k];
      gb[k] = g[k] * a.value()[k];
    }
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  }, "hadamard");
}

inline Var scale(const Var& a, double c) {
  Matrix out = a.value();
  out *= c;
  return detail::tape_of(a).record(std::move(out), {a}, [a, c](Tape& t, const Matrix& g) {
    Matrix ga = g;
    ga *= c;
    t.accumulate(a, ga);
  }, "scale");
}

inline Var transpose(const Var& a) {
  return detail::tape_of(a).record(a.value().transposed(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.transposed());
  }, "transpose");
}

inline Var sum(const Var& a) {
  return detail::tape_of(a).record(Matrix(1, 1, a.value().sum()), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix(a.rows(), a.cols(), g[0]));
  }, "sum");
}

/// Sum of scalars; convenience for assembling a loss from several terms.
inline Var add_scalars(const std::vector<Var>& terms) {
  if (terms.empty()) fail(ErrorKind::invalid_argument, "add_scalars: no terms");
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

// Subgradient at the kink is 0.
inline Var relu(const Var& a) {
  return detail::tape_of(a).record(detail::map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }),
                                   {a}, detail::unary_backprop(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; }),
                                   "relu");
}

// Zero gradient outside the open interval (0, 1).
inline Var clip01(const Var& a) {
  return detail::tape_of(a).record(
      detail::map(a.value(), [](double x) { return std::clamp(x, 0.0, 1.0); }), {a},
      detail::unary_backprop(a, [](double x) { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; }), "clip01");
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
  Matrix out = detail::map(a.value(), stable_sigmoid);
  Matrix saved = out;
  return detail::tape_of(a).record(std::move(out), {a}, [a, s = std::move(saved)](Tape& t, const Matrix& g) {
    Matrix ga(g.rows(), g.cols());
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * s[k] * (1.0 - s[k]);
    t.accumulate(a, ga);
  }, "sigmoid");
}

inline Var frobenius_sq(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  return detail::tape_of(a).record(Matrix(1, 1, s), {a}, [a](Tape& t, const Matrix& g) {
    Matrix ga = a.value();
    ga *= 2.0 * g[0];
    t.accumulate(a, ga);
  }, "frobenius_sq");
}

inline constexpr double kNormEpsilon = 1e-12;

/// Frobenius (L2) norm. At the origin the value is 0 and the gradient is 0.
inline Var l2_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  const double norm = std::sqrt(s);
  return detail::tape_of(a).record(Matrix(1, 1, norm), {a}, [a, norm](Tape& t, const Matrix& g) {
    Matrix ga = a.value();
    ga *= norm > kNormEpsilon ? g[0] / norm : 0.0;
    t.accumulate(a, ga);
  }, "l2_norm");
}

/// Mean over masked rows of -log softmax(logits)[label]. Row maxima are
/// subtracted before exponentiating.
inline Var masked_softmax_cross_entropy(const Var& logits, std::span<const int> labels,
                                        const std::vector<bool>& mask) {
  const Matrix& z = logits.value();
  const std::size_t n = z.rows();
  const std::size_t c = z.cols();
  if (labels.size() != n || mask.size() != n) {
    fail(ErrorKind::dimension, "cross entropy: logits " + z.shape() + " vs " + std::to_string(labels.size()) +
                                   " labels / " + std::to_string(mask.size()) + " mask entries");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    ++count;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      fail(ErrorKind::label, "label " + std::to_string(labels[i]) + " at node " + std::to_string(i) +
                                 " outside [0, " + std::to_string(c) + ")");
    }
  }
  if (count == 0) fail(ErrorKind::invalid_argument, "cross entropy: mask selects no nodes");

  Matrix probs(n, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) probs(i, j) = std::exp(row[j] - mx) / denom;
    loss += -(row[static_cast<std::size_t>(labels[i])] - mx - std::log(denom));
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<int> lab(labels.begin(), labels.end());
  return detail::tape_of(logits).record(
      Matrix(1, 1, loss * inv), {logits},
      [logits, p = std::move(probs), lab = std::move(lab), mask, inv](Tape& t, const Matrix& g) {
        Matrix gz(p.rows(), p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          if (!mask[i]) continue;
          for (std::size_t j = 0; j < p.cols(); ++j) gz(i, j) = p(i, j) * inv * g[0];
          gz(i, static_cast<std::size_t>(lab[i])) -= inv * g[0];
        }
        t.accumulate(logits, gz);
      },
      "masked_softmax_cross_entropy");
}

/// Row-wise softmax of a plain matrix (evaluation only).
inline Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - mx);
    for (std::size_t j = 0; j < z.cols(); ++j) p(i, j) = std::exp(row[j] - mx) / denom;
  }
  return p;
}

struct AdamaxOptions {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adamax: Adam with the second moment replaced by an exponentially
/// weighted infinity norm.
class AdamaxState {
 public:
  AdamaxState() = default;
  AdamaxState(std::size_t rows, std::size_t cols, AdamaxOptions options = {})
      : m_(rows, cols), u_(rows, cols), options_(options) {}

  void step(Tensor& param) {
    if (!param.grad) fail(ErrorKind::state, "adamax step on a parameter without gradient");
    const Matrix& g = *param.grad;
    if (!g.same_shape(m_) || !param.value.same_shape(m_)) {
      fail(ErrorKind::dimension, "adamax state " + m_.shape() + " vs parameter " + param.value.shape());
    }
    ++t_;
    const double step = options_.lr / (1.0 - std::pow(options_.beta1, static_cast<double>(t_)));
    for (std::size_t k = 0; k < g.size(); ++k) {
      m_[k] = options_.beta1 * m_[k] + (1.0 - options_.beta1) * g[k];
      u_[k] = std::max(options_.beta2 * u_[k], std::abs(g[k]));
      param.value[k] -= step * m_[k] / (u_[k] + options_.eps);
    }
  }

  std::uint64_t steps() const noexcept { return t_; }
  const Matrix& first_moment() const noexcept { return m_; }
  const Matrix& infinity_norm() const noexcept { return u_; }
  const AdamaxOptions& options() const noexcept { return options_; }

 private:
  Matrix m_;
  Matrix u_;
  std::uint64_t t_ = 0;
  AdamaxOptions options_;
};

/// Debug dump: one row per line, %.17g values.
inline std::string to_csv(const Matrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace linkforge
