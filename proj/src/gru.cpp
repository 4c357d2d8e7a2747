// SPDX-License-Identifier: Apache-2.0
#include "mad/gru.hpp"

#include "mad/error.hpp"

namespace mad {

Var gru_cell(Var input, Var hidden, const GruWeights& w) {
  const Tensor& wz = w.w_update.value();
  if (wz.rank() != 2 || wz.rows() != hidden.size() ||
      wz.cols() != input.size()) {
    throw ShapeError("gru_cell: weight " + shape_str(wz.shape()) +
                     " does not map input " + shape_str(input.shape()) +
                     " to hidden " + shape_str(hidden.shape()));
  }
  Var z = sigmoid(add(add(matvec(w.w_update, input), matvec(w.u_update, hidden)),
                      w.b_update));
  Var r = sigmoid(add(add(matvec(w.w_reset, input), matvec(w.u_reset, hidden)),
                      w.b_reset));
  Var cand = tanh(add(add(matvec(w.w_cand, input),
                          matvec(w.u_cand, mul(r, hidden))),
                      w.b_cand));
  return add(mul(one_minus(z), hidden), mul(z, cand));
}

}  // namespace mad
