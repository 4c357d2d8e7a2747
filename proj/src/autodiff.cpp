// SPDX-License-Identifier: Apache-2.0
#include "mad/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "mad/error.hpp"

namespace mad {

// ---------------------------------------------------------------------------
// ParamStore / Gradients

std::size_t ParamStore::add(std::string name, Shape shape, bool trainable) {
  Parameter p;
  p.name = std::move(name);
  p.value = Tensor(std::move(shape));
  p.index = params_.size();
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Tensor& Gradients::slot(const Parameter& p) {
  if (p.index >= grads_.size()) grads_.resize(p.index + 1);
  Tensor& g = grads_[p.index];
  if (g.empty()) g = Tensor::zeros(p.value.shape());
  return g;
}

const Tensor* Gradients::get(std::size_t index) const {
  if (index >= grads_.size() || grads_[index].empty()) return nullptr;
  return &grads_[index];
}

void Gradients::add(const Gradients& other) {
  if (other.grads_.size() > grads_.size()) grads_.resize(other.grads_.size());
  for (std::size_t i = 0; i < other.grads_.size(); ++i) {
    const Tensor& src = other.grads_[i];
    if (src.empty()) continue;
    Tensor& dst = grads_[i];
    if (dst.empty()) {
      dst = src;
    } else {
      kernels::axpy(1.0, src.data(), dst.data(), src.size());
    }
  }
}

void Gradients::scale(double s) {
  for (auto& g : grads_) {
    for (auto& x : g.values()) x *= s;
  }
}

void Gradients::clear() {
  for (auto& g : grads_) g = Tensor();
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape->value(*this); }

void Tape::check_owned(Var v, const char* op) const {
  if (v.tape != this || v.id < 0 ||
      static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error(std::string(op) + ": node is not on this tape");
  }
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) {
    throw NumericalError("constant: non-finite input value");
  }
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const Parameter& p) {
  for (std::size_t k = 0; k < param_ptrs_.size(); ++k) {
    if (param_ptrs_[k] == &p) return {this, param_nodes_[k]};
  }
  Node n;
  n.ref = &p.value;
  n.needs_grad = record_ && p.trainable;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_ptrs_.push_back(&p);
  param_nodes_.push_back(id);
  return {this, id};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.ref ? *n.ref : n.value;
}

Var Tape::emit(const char* op, Tensor value, std::initializer_list<Var> inputs,
               Adjoint adjoint) {
  return emit(op, std::move(value), std::vector<Var>(inputs),
              std::move(adjoint));
}

Var Tape::emit(const char* op, Tensor value, const std::vector<Var>& inputs,
               Adjoint adjoint) {
  if (consumed_) throw Error(std::string(op) + ": tape already consumed");
  if (!value.all_finite()) {
    throw NumericalError(std::string(op) +
                         ": numerical instability, non-finite output " +
                         shape_str(value.shape()));
  }
  bool ng = false;
  for (const Var& in : inputs) {
    check_owned(in, op);
    ng = ng || nodes_[static_cast<std::size_t>(in.id)].needs_grad;
  }
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && ng;
  if (n.needs_grad) n.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::accum(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.ref) {
    for (std::size_t k = 0; k < param_nodes_.size(); ++k) {
      if (param_nodes_[k] == id) return sink_->slot(*param_ptrs_[k]);
    }
  }
  if (n.grad.empty()) n.grad = Tensor::zeros(value({this, id}).shape());
  return n.grad;
}

void Tape::backward(Var loss, Gradients& grads) {
  check_owned(loss, "backward");
  if (consumed_) throw Error("backward: tape already consumed");
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(value(loss).shape()));
  }
  consumed_ = true;
  if (!nodes_[static_cast<std::size_t>(loss.id)].needs_grad) return;
  sink_ = &grads;
  accum(loss.id)[0] += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || !n.adjoint || n.grad.empty()) continue;
    Tensor g = std::move(n.grad);
    n.grad = Tensor();
    n.adjoint(*this, g);
    n.grad = std::move(g);  // kept for grad_of()
  }
  sink_ = nullptr;
}

Tensor Tape::grad_of(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.empty()) return Tensor::zeros(value(v).shape());
  return n.grad;
}

// ---------------------------------------------------------------------------
// ops

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

Tape& same_tape(const char* op, Var a, Var b) {
  if (!a.valid() || !b.valid()) throw Error(std::string(op) + ": invalid var");
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
  return *a.tape;
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

template <typename F>
Var unary(const char* op, Var a, F f, Tape::Adjoint adj) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->emit(op, std::move(y), {a}, std::move(adj));
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_fail("add", x.shape(), y.shape());
  Tensor out = x;
  kernels::axpy(1.0, y.data(), out.data(), out.size());
  return t.emit("add", std::move(out), {a, b},
                [a, b](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad(a.id))
                    kernels::axpy(1.0, g.data(), tp.accum(a.id).data(), g.size());
                  if (tp.needs_grad(b.id))
                    kernels::axpy(1.0, g.data(), tp.accum(b.id).data(), g.size());
                });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_fail("sub", x.shape(), y.shape());
  Tensor out = x;
  kernels::axpy(-1.0, y.data(), out.data(), out.size());
  return t.emit("sub", std::move(out), {a, b},
                [a, b](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad(a.id))
                    kernels::axpy(1.0, g.data(), tp.accum(a.id).data(), g.size());
                  if (tp.needs_grad(b.id))
                    kernels::axpy(-1.0, g.data(), tp.accum(b.id).data(), g.size());
                });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_fail("mul", x.shape(), y.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return t.emit("mul", std::move(out), {a, b},
                [a, b](Tape& tp, const Tensor& g) {
                  const Tensor& xv = tp.value(a);
                  const Tensor& yv = tp.value(b);
                  if (tp.needs_grad(a.id)) {
                    Tensor& ga = tp.accum(a.id);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
                  }
                  if (tp.needs_grad(b.id)) {
                    Tensor& gb = tp.accum(b.id);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
                  }
                });
}

Var add_row(Var x, Var v) {
  Tape& t = same_tape("add_row", x, v);
  const Tensor& m = x.value();
  const Tensor& r = v.value();
  if (m.rank() != 2 || r.rank() != 1 || m.cols() != r.size()) {
    shape_fail("add_row", m.shape(), r.shape());
  }
  Tensor out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    kernels::axpy(1.0, r.data(), out.row(i).data(), r.size());
  }
  return t.emit("add_row", std::move(out), {x, v},
                [x, v](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad(x.id))
                    kernels::axpy(1.0, g.data(), tp.accum(x.id).data(), g.size());
                  if (tp.needs_grad(v.id)) {
                    Tensor& gv = tp.accum(v.id);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      kernels::axpy(1.0, g.row(i).data(), gv.data(), gv.size());
                  }
                });
}

Var scale(Var a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; },
      [a, s](Tape& tp, const Tensor& g) {
        kernels::axpy(s, g.data(), tp.accum(a.id).data(), g.size());
      });
}

Var add_scalar(Var a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; },
      [a](Tape& tp, const Tensor& g) {
        kernels::axpy(1.0, g.data(), tp.accum(a.id).data(), g.size());
      });
}

Var one_minus(Var a) {
  return unary(
      "one_minus", a, [](double x) { return 1.0 - x; },
      [a](Tape& tp, const Tensor& g) {
        kernels::axpy(-1.0, g.data(), tp.accum(a.id).data(), g.size());
      });
}

Var matvec(Var w, Var x) {
  Tape& t = same_tape("matvec", w, x);
  const Tensor& W = w.value();
  const Tensor& v = x.value();
  if (W.rank() != 2 || v.rank() != 1 || W.cols() != v.size()) {
    shape_fail("matvec", W.shape(), v.shape());
  }
  const std::size_t r = W.rows(), c = W.cols();
  Tensor out({r});
  for (std::size_t i = 0; i < r; ++i) {
    out[i] = kernels::dot(W.data() + i * c, v.data(), c);
  }
  return t.emit("matvec", std::move(out), {w, x},
                [w, x, r, c](Tape& tp, const Tensor& g) {
                  const Tensor& Wv = tp.value(w);
                  const Tensor& xv = tp.value(x);
                  if (tp.needs_grad(w.id)) {
                    Tensor& gw = tp.accum(w.id);
                    for (std::size_t i = 0; i < r; ++i) {
                      if (g[i] != 0.0)
                        kernels::axpy(g[i], xv.data(), gw.data() + i * c, c);
                    }
                  }
                  if (tp.needs_grad(x.id)) {
                    Tensor& gx = tp.accum(x.id);
                    for (std::size_t i = 0; i < r; ++i) {
                      if (g[i] != 0.0)
                        kernels::axpy(g[i], Wv.data() + i * c, gx.data(), c);
                    }
                  }
                });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
    shape_fail("matmul", A.shape(), B.shape());
  }
  const std::size_t n = A.rows(), k = A.cols(), c = B.cols();
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      kernels::axpy(A.at(i, j), B.data() + j * c, out.data() + i * c, c);
  return t.emit("matmul", std::move(out), {a, b},
                [a, b, n, k, c](Tape& tp, const Tensor& g) {
                  const Tensor& Av = tp.value(a);
                  const Tensor& Bv = tp.value(b);
                  if (tp.needs_grad(a.id)) {
                    Tensor& ga = tp.accum(a.id);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < k; ++j)
                        ga.at(i, j) += kernels::dot(g.data() + i * c,
                                                    Bv.data() + j * c, c);
                  }
                  if (tp.needs_grad(b.id)) {
                    Tensor& gb = tp.accum(b.id);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < k; ++j)
                        kernels::axpy(Av.at(i, j), g.data() + i * c,
                                      gb.data() + j * c, c);
                  }
                });
}

Var matmul_nt(Var x, Var w) {
  Tape& t = same_tape("matmul_nt", x, w);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (X.rank() != 2 || W.rank() != 2 || X.cols() != W.cols()) {
    shape_fail("matmul_nt", X.shape(), W.shape());
  }
  const std::size_t n = X.rows(), r = W.rows(), c = X.cols();
  Tensor out({n, r});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < r; ++k) {
      out.at(i, k) = kernels::dot(X.data() + i * c, W.data() + k * c, c);
    }
  }
  return t.emit("matmul_nt", std::move(out), {x, w},
                [x, w, n, r, c](Tape& tp, const Tensor& g) {
                  const Tensor& Xv = tp.value(x);
                  const Tensor& Wv = tp.value(w);
                  if (tp.needs_grad(x.id)) {
                    Tensor& gx = tp.accum(x.id);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t k = 0; k < r; ++k)
                        kernels::axpy(g.at(i, k), Wv.data() + k * c,
                                      gx.data() + i * c, c);
                  }
                  if (tp.needs_grad(w.id)) {
                    Tensor& gw = tp.accum(w.id);
                    for (std::size_t k = 0; k < r; ++k)
                      for (std::size_t i = 0; i < n; ++i)
                        kernels::axpy(g.at(i, k), Xv.data() + i * c,
                                      gw.data() + k * c, c);
                  }
                });
}

Var weighted_rows(Var x, Var a) {
  Tape& t = same_tape("weighted_rows", x, a);
  const Tensor& X = x.value();
  const Tensor& w = a.value();
  if (X.rank() != 2 || w.rank() != 1 || X.rows() != w.size()) {
    shape_fail("weighted_rows", X.shape(), w.shape());
  }
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out({c});
  for (std::size_t i = 0; i < n; ++i) {
    kernels::axpy(w[i], X.data() + i * c, out.data(), c);
  }
  return t.emit("weighted_rows", std::move(out), {x, a},
                [x, a, n, c](Tape& tp, const Tensor& g) {
                  const Tensor& Xv = tp.value(x);
                  const Tensor& wv = tp.value(a);
                  if (tp.needs_grad(x.id)) {
                    Tensor& gx = tp.accum(x.id);
                    for (std::size_t i = 0; i < n; ++i)
                      kernels::axpy(wv[i], g.data(), gx.data() + i * c, c);
                  }
                  if (tp.needs_grad(a.id)) {
                    Tensor& ga = tp.accum(a.id);
                    for (std::size_t i = 0; i < n; ++i)
                      ga[i] += kernels::dot(Xv.data() + i * c, g.data(), c);
                  }
                });
}

Var outer(Var a, Var b) {
  Tape& t = same_tape("outer", a, b);
  const Tensor& u = a.value();
  const Tensor& v = b.value();
  if (u.rank() != 1 || v.rank() != 1) shape_fail("outer", u.shape(), v.shape());
  const std::size_t n = u.size(), c = v.size();
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    kernels::axpy(u[i], v.data(), out.data() + i * c, c);
  }
  return t.emit("outer", std::move(out), {a, b},
                [a, b, n, c](Tape& tp, const Tensor& g) {
                  const Tensor& uv = tp.value(a);
                  const Tensor& vv = tp.value(b);
                  if (tp.needs_grad(a.id)) {
                    Tensor& ga = tp.accum(a.id);
                    for (std::size_t i = 0; i < n; ++i)
                      ga[i] += kernels::dot(g.data() + i * c, vv.data(), c);
                  }
                  if (tp.needs_grad(b.id)) {
                    Tensor& gb = tp.accum(b.id);
                    for (std::size_t i = 0; i < n; ++i)
                      kernels::axpy(uv[i], g.data() + i * c, gb.data(), c);
                  }
                });
}

Var row_scale(Var x, Var s) {
  Tape& t = same_tape("row_scale", x, s);
  const Tensor& X = x.value();
  const Tensor& w = s.value();
  if (X.rank() != 2 || w.rank() != 1 || X.rows() != w.size()) {
    shape_fail("row_scale", X.shape(), w.shape());
  }
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    kernels::axpy(w[i], X.data() + i * c, out.data() + i * c, c);
  }
  return t.emit("row_scale", std::move(out), {x, s},
                [x, s, n, c](Tape& tp, const Tensor& g) {
                  const Tensor& Xv = tp.value(x);
                  const Tensor& wv = tp.value(s);
                  if (tp.needs_grad(x.id)) {
                    Tensor& gx = tp.accum(x.id);
                    for (std::size_t i = 0; i < n; ++i)
                      kernels::axpy(wv[i], g.data() + i * c, gx.data() + i * c, c);
                  }
                  if (tp.needs_grad(s.id)) {
                    Tensor& gs = tp.accum(s.id);
                    for (std::size_t i = 0; i < n; ++i)
                      gs[i] += kernels::dot(g.data() + i * c, Xv.data() + i * c, c);
                  }
                });
}

Var row_dot(Var a, Var b) {
  Tape& t = same_tape("row_dot", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || A.shape() != B.shape()) {
    shape_fail("row_dot", A.shape(), B.shape());
  }
  const std::size_t n = A.rows(), c = A.cols();
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = kernels::dot(A.data() + i * c, B.data() + i * c, c);
  }
  return t.emit("row_dot", std::move(out), {a, b},
                [a, b, n, c](Tape& tp, const Tensor& g) {
                  const Tensor& Av = tp.value(a);
                  const Tensor& Bv = tp.value(b);
                  if (tp.needs_grad(a.id)) {
                    Tensor& ga = tp.accum(a.id);
                    for (std::size_t i = 0; i < n; ++i)
                      kernels::axpy(g[i], Bv.data() + i * c, ga.data() + i * c, c);
                  }
                  if (tp.needs_grad(b.id)) {
                    Tensor& gb = tp.accum(b.id);
                    for (std::size_t i = 0; i < n; ++i)
                      kernels::axpy(g[i], Av.data() + i * c, gb.data() + i * c, c);
                  }
                });
}

Var row(Var x, std::size_t i) {
  const Tensor& X = x.value();
  require_rank("row", X, 2);
  if (i >= X.rows()) {
    throw ShapeError("row: index " + std::to_string(i) + " out of range for " +
                     shape_str(X.shape()));
  }
  const std::size_t c = X.cols();
  Tensor out({c}, std::vector<double>(X.data() + i * c, X.data() + (i + 1) * c));
  return x.tape->emit("row", std::move(out), {x},
                      [x, i, c](Tape& tp, const Tensor& g) {
                        kernels::axpy(1.0, g.data(),
                                      tp.accum(x.id).data() + i * c, c);
                      });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Tape& t = *rows.front().tape;
  const std::size_t c = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * c);
  for (const Var& r : rows) {
    const Tensor& v = r.value();
    if (v.rank() != 1 || v.size() != c) {
      shape_fail("stack_rows", rows.front().shape(), v.shape());
    }
    data.insert(data.end(), v.values().begin(), v.values().end());
  }
  Tensor out({rows.size(), c}, std::move(data));
  return t.emit("stack_rows", std::move(out), rows,
                [rows, c](Tape& tp, const Tensor& g) {
                  for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (!tp.needs_grad(rows[i].id)) continue;
                    kernels::axpy(1.0, g.data() + i * c,
                                  tp.accum(rows[i].id).data(), c);
                  }
                });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts.front().tape;
  std::vector<double> data;
  for (const Var& p : parts) {
    const auto& v = p.value().values();
    data.insert(data.end(), v.begin(), v.end());
  }
  Tensor out = Tensor::vector(std::move(data));
  return t.emit("concat", std::move(out), parts,
                [parts](Tape& tp, const Tensor& g) {
                  std::size_t off = 0;
                  for (const Var& p : parts) {
                    const std::size_t n = tp.value(p).size();
                    if (tp.needs_grad(p.id))
                      kernels::axpy(1.0, g.data() + off, tp.accum(p.id).data(), n);
                    off += n;
                  }
                });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value();
  out.reshape(std::move(shape));
  return a.tape->emit("reshape", std::move(out), {a},
                      [a](Tape& tp, const Tensor& g) {
                        kernels::axpy(1.0, g.data(), tp.accum(a.id).data(),
                                      g.size());
                      });
}

Var mean_rows(Var x) {
  const Tensor& X = x.value();
  require_rank("mean_rows", X, 2);
  const std::size_t n = X.rows(), c = X.cols();
  const double inv = 1.0 / static_cast<double>(n);
  Tensor out({c});
  for (std::size_t i = 0; i < n; ++i) {
    kernels::axpy(1.0, X.data() + i * c, out.data(), c);
  }
  for (auto& v : out.values()) v *= inv;
  return x.tape->emit("mean_rows", std::move(out), {x},
                      [x, n, c, inv](Tape& tp, const Tensor& g) {
                        Tensor& gx = tp.accum(x.id);
                        for (std::size_t i = 0; i < n; ++i)
                          kernels::axpy(inv, g.data(), gx.data() + i * c, c);
                      });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0;
  for (double v : x.values()) s += v;
  return a.tape->emit("sum", Tensor::scalar(s), {a},
                      [a](Tape& tp, const Tensor& g) {
                        for (auto& v : tp.accum(a.id).values()) v += g[0];
                      });
}

Var dot(Var a, Var b) {
  Tape& t = same_tape("dot", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.size() != y.size() || x.rank() != 1 || y.rank() != 1) {
    shape_fail("dot", x.shape(), y.shape());
  }
  const double s = kernels::dot(x.data(), y.data(), x.size());
  return t.emit("dot", Tensor::scalar(s), {a, b},
                [a, b](Tape& tp, const Tensor& g) {
                  const Tensor& xv = tp.value(a);
                  const Tensor& yv = tp.value(b);
                  if (tp.needs_grad(a.id))
                    kernels::axpy(g[0], yv.data(), tp.accum(a.id).data(), yv.size());
                  if (tp.needs_grad(b.id))
                    kernels::axpy(g[0], xv.data(), tp.accum(b.id).data(), xv.size());
                });
}

namespace {
double logistic(double x) {
  // Split by sign so large |x| never overflows exp().
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = logistic(x[i]);
  Tape& t = *a.tape;
  const int self = static_cast<int>(t.node_count());
  return t.emit("sigmoid", std::move(y), {a},
                [a, self](Tape& tp, const Tensor& g) {
                  const Tensor& yv = tp.value({&tp, self});
                  Tensor& ga = tp.accum(a.id);
                  for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * yv[i] * (1.0 - yv[i]);
                });
}

Var tanh(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  Tape& t = *a.tape;
  const int self = static_cast<int>(t.node_count());
  return t.emit("tanh", std::move(y), {a},
                [a, self](Tape& tp, const Tensor& g) {
                  const Tensor& yv = tp.value({&tp, self});
                  Tensor& ga = tp.accum(a.id);
                  for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - yv[i] * yv[i]);
                });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  if (x.rank() < 1 || x.rank() > 2) {
    throw ShapeError("softmax: expected vector or matrix, got " +
                     shape_str(x.shape()));
  }
  const std::size_t n = x.rows(), c = x.cols();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = x.data() + i * c;
    double* out = y.data() + i * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0;
    for (std::size_t k = 0; k < c; ++k) {
      out[k] = std::exp(in[k] - mx);
      z += out[k];
    }
    for (std::size_t k = 0; k < c; ++k) out[k] /= z;
  }
  Tape& t = *a.tape;
  const int self = static_cast<int>(t.node_count());
  return t.emit("softmax", std::move(y), {a},
                [a, self, n, c](Tape& tp, const Tensor& g) {
                  const Tensor& yv = tp.value({&tp, self});
                  Tensor& ga = tp.accum(a.id);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double* yr = yv.data() + i * c;
                    const double* gr = g.data() + i * c;
                    const double s = kernels::dot(gr, yr, c);
                    double* out = ga.data() + i * c;
                    for (std::size_t k = 0; k < c; ++k)
                      out[k] += yr[k] * (gr[k] - s);
                  }
                });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); },
      [a](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.accum(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
      });
}

Var gather_rows(Var table, const std::vector<int>& ids) {
  const Tensor& E = table.value();
  require_rank("gather_rows", E, 2);
  if (ids.empty()) throw ShapeError("gather_rows: empty id list");
  const std::size_t c = E.cols();
  Tensor out({ids.size(), c});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || static_cast<std::size_t>(ids[k]) >= E.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[k]) +
                       " out of range for " + shape_str(E.shape()));
    }
    const auto src = E.row(static_cast<std::size_t>(ids[k]));
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return table.tape->emit("gather_rows", std::move(out), {table},
                          [table, ids, c](Tape& tp, const Tensor& g) {
                            Tensor& ge = tp.accum(table.id);
                            for (std::size_t k = 0; k < ids.size(); ++k) {
                              if (ids[k] == 0) continue;
                              kernels::axpy(1.0, g.data() + k * c,
                                            ge.data() + ids[k] * c, c);
                            }
                          });
}

Var cross_entropy(Var probs, std::size_t target) {
  const Tensor& p = probs.value();
  if (target >= p.size()) {
    throw ShapeError("cross_entropy: target " + std::to_string(target) +
                     " out of range for " + shape_str(p.shape()));
  }
  const double pt = std::max(p[target], kProbFloor);
  return probs.tape->emit(
      "cross_entropy", Tensor::scalar(-std::log(pt)), {probs},
      [probs, target](Tape& tp, const Tensor& g) {
        const double v = tp.value(probs)[target];
        if (v >= kProbFloor) tp.accum(probs.id)[target] += -g[0] / v;
      });
}

Var soft_cross_entropy(Var probs, const Tensor& target) {
  const Tensor& p = probs.value();
  if (p.shape() != target.shape()) {
    shape_fail("soft_cross_entropy", p.shape(), target.shape());
  }
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (target[i] != 0.0) s -= target[i] * std::log(std::max(p[i], kProbFloor));
  }
  return probs.tape->emit(
      "soft_cross_entropy", Tensor::scalar(s), {probs},
      [probs, target](Tape& tp, const Tensor& g) {
        const Tensor& pv = tp.value(probs);
        Tensor& gp = tp.accum(probs.id);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          if (target[i] != 0.0 && pv[i] >= kProbFloor)
            gp[i] += -g[0] * target[i] / pv[i];
        }
      });
}

Var binary_cross_entropy(Var probs, const Tensor& targets) {
  const Tensor& p = probs.value();
  if (p.shape() != targets.shape()) {
    shape_fail("binary_cross_entropy", p.shape(), targets.shape());
  }
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0) s -= y * std::log(std::max(p[i], kProbFloor));
    if (y != 1.0) s -= (1.0 - y) * std::log(std::max(1.0 - p[i], kProbFloor));
  }
  return probs.tape->emit(
      "binary_cross_entropy", Tensor::scalar(s), {probs},
      [probs, targets](Tape& tp, const Tensor& g) {
        const Tensor& pv = tp.value(probs);
        Tensor& gp = tp.accum(probs.id);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const double y = targets[i];
          if (y != 0.0 && pv[i] >= kProbFloor) gp[i] += -g[0] * y / pv[i];
          if (y != 1.0 && 1.0 - pv[i] >= kProbFloor)
            gp[i] += g[0] * (1.0 - y) / (1.0 - pv[i]);
        }
      });
}

}  // namespace mad
