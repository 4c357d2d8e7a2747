// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over small dense tensors.
//
// Every forward op appends a node to the tape that owns its operands. Nodes
// hold their forward value and, when any input needs a gradient, an adjoint
// rule. `Tape::backward` walks the nodes once in reverse order and deposits
// parameter gradients into a `Gradients` buffer.
//
// Shapes are explicit: the only broadcast is `add_row` (vector added to every
// row of a matrix).
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mad/tensor.hpp"

namespace mad {

class Tape;

/// Trainable (or frozen) named tensor owned by a `ParamStore`.
struct Parameter {
  std::string name;
  Tensor value;
  std::size_t index = 0;
  bool trainable = true;
};

/// Owns the parameters of one model. Indices are stable.
class ParamStore {
 public:
  std::size_t add(std::string name, Shape shape, bool trainable = true);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  const Parameter* find(const std::string& name) const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

 private:
  std::vector<Parameter> params_;
};

/// Gradient buffer with one lazily-allocated slot per parameter index.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::size_t count) : grads_(count) {}

  Tensor& slot(const Parameter& p);
  const Tensor* get(std::size_t index) const;
  std::size_t size() const { return grads_.size(); }

  void add(const Gradients& other);
  void scale(double s);
  void clear();

 private:
  std::vector<Tensor> grads_;
};

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

class Tape {
 public:
  /// With `record == false` no adjoint rules are stored (inference mode).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(const Parameter& p);

  const Tensor& value(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }
  bool recording() const { return record_; }

  /// Reverse pass from a scalar node; gradients of parameter leaves are
  /// accumulated into `grads`. The tape cannot be differentiated twice.
  void backward(Var loss, Gradients& grads);

  /// Gradient of an interior node after `backward` (zero tensor if the node
  /// received none). Used by tests.
  Tensor grad_of(Var v) const;

  // ---- internal API used by the op implementations ----
  using Adjoint = std::function<void(Tape&, const Tensor& grad)>;
  Var emit(const char* op, Tensor value, std::initializer_list<Var> inputs,
           Adjoint adjoint);
  Var emit(const char* op, Tensor value, const std::vector<Var>& inputs,
           Adjoint adjoint);
  /// Gradient accumulator of a node, allocated on first use.
  Tensor& accum(int id);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  void check_owned(Var v, const char* op) const;

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    bool needs_grad = false;
    Adjoint adjoint;
    Tensor grad;
  };

  bool record_;
  bool consumed_ = false;
  Gradients* sink_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
  std::vector<const Parameter*> param_ptrs_;
};

// ---- primitive ops ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// X[n x c] + v[c] added to every row.
Var add_row(Var x, Var v);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// 1 - a
Var one_minus(Var a);
/// W[r x c] * x[c] -> [r]
Var matvec(Var w, Var x);
/// A[n x k] * B[k x c] -> [n x c]
Var matmul(Var a, Var b);
/// X[n x c] * W[r x c]^T -> [n x r]
Var matmul_nt(Var x, Var w);
/// sum_n a[n] * X[n, :] -> [c]
Var weighted_rows(Var x, Var a);
/// a[n] b[c]^T -> [n x c]
Var outer(Var a, Var b);
/// row n of X scaled by s[n]
Var row_scale(Var x, Var s);
/// dot products of matching rows -> [n]
Var row_dot(Var a, Var b);
Var row(Var x, std::size_t i);
Var stack_rows(const std::vector<Var>& rows);
/// Flattened concatenation of all inputs.
Var concat(const std::vector<Var>& parts);
Var reshape(Var a, Shape shape);
/// Mean over the row axis: [n x c] -> [c].
Var mean_rows(Var x);
Var sum(Var a);
Var dot(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
/// Softmax over the last axis (row-wise for matrices).
Var softmax(Var a);
Var log(Var a);
/// Rows `ids` of the embedding matrix. Row 0 (padding) never receives
/// gradient.
Var gather_rows(Var table, const std::vector<int>& ids);

inline constexpr double kProbFloor = 1e-12;

/// -ln max(p[target], 1e-12)
Var cross_entropy(Var probs, std::size_t target);
/// -sum_k q[k] ln max(p[k], 1e-12)
Var soft_cross_entropy(Var probs, const Tensor& target);
/// -sum_k [y ln max(p, eps) + (1 - y) ln max(1 - p, eps)]
Var binary_cross_entropy(Var probs, const Tensor& targets);

}  // namespace mad
