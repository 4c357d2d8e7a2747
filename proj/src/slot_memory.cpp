// SPDX-License-Identifier: Apache-2.0
#include "mad/slot_memory.hpp"

#include "mad/error.hpp"

namespace mad {

Var read_value_memory(Var value_memory) { return mean_rows(value_memory); }

Var update_gates(Var prev_response, Var contexts, const GateWeights& w) {
  Var from_response = matvec(w.prev_response, prev_response);
  Var from_context = row_dot(w.context, contexts);
  return sigmoid(add(add(from_response, from_context), w.bias));
}

Var update_gate(Var prev_response, Var context, std::size_t slot,
                const GateWeights& w) {
  Var wy = row(w.prev_response, slot);
  Var wc = row(w.context, slot);
  Var b = reshape(row(reshape(w.bias, {w.bias.size(), 1}), slot), {1});
  return sigmoid(add(add(dot(wy, prev_response), dot(wc, context)), b));
}

Var write_value_memory(Var value_memory, Var gates, Var contexts) {
  if (value_memory.shape() != contexts.shape()) {
    throw ShapeError("write_value_memory: memory " +
                     shape_str(value_memory.shape()) + " vs contexts " +
                     shape_str(contexts.shape()));
  }
  return add(row_scale(contexts, gates),
             row_scale(value_memory, one_minus(gates)));
}

Var write_value_memory_row(Var value_memory, std::size_t slot, Var gate,
                           Var context) {
  const std::size_t n = value_memory.value().rows();
  const std::size_t m = value_memory.value().cols();
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Var old = row(value_memory, i);
    if (i != slot) {
      rows.push_back(old);
      continue;
    }
    Var g = reshape(gate, {1, 1});
    Var mixed = add(reshape(row_scale(reshape(context, {1, m}), reshape(g, {1})), {m}),
                    reshape(row_scale(reshape(old, {1, m}), one_minus(reshape(g, {1}))), {m}));
    rows.push_back(mixed);
  }
  return stack_rows(rows);
}

}  // namespace mad
