// SPDX-License-Identifier: Apache-2.0
#include "mad/external_memory.hpp"

#include "mad/error.hpp"

namespace mad {

ExternalRead read_external(Var memory, Var prev_state, Var prev_weights,
                           const ExternalMemoryWeights& w) {
  const Tensor& mem = memory.value();
  if (mem.rank() != 2 || prev_weights.size() != mem.rows() ||
      prev_state.size() != mem.cols()) {
    throw ShapeError("read_external: memory " + shape_str(mem.shape()) +
                     " vs weights " + shape_str(prev_weights.shape()));
  }
  const std::size_t units = mem.rows();
  // The state term is identical for every unit.
  Var state_term = dot(w.address_state, prev_state);
  Var ones = memory.tape->constant(Tensor::matrix(units, 1, std::vector<double>(units, 1.0)));
  Var logits = add(matvec(memory, w.address_unit), matvec(ones, state_term));
  Var candidate = softmax(logits);
  Var gate = sigmoid(matvec(w.read_gate, prev_state));
  Var weights = add(mul(gate, prev_weights), mul(one_minus(gate), candidate));
  return {weighted_rows(memory, weights), weights};
}

Var write_external(Var memory, Var state, Var read_weights,
                   const ExternalMemoryWeights& w) {
  Var erase = sigmoid(matvec(w.erase, state));
  Var add_vec = sigmoid(matvec(w.add, state));
  Var kept = mul(memory, one_minus(outer(read_weights, erase)));
  return add(kept, outer(read_weights, add_vec));
}

}  // namespace mad
