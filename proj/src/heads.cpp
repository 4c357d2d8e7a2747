// SPDX-License-Identifier: Apache-2.0
#include "mad/heads.hpp"

#include "mad/error.hpp"

namespace mad {

Var mlp_logits(Var input, const MlpWeights& w) {
  Var h = tanh(add(matvec(w.hidden, input), w.hidden_bias));
  return add(matvec(w.out, h), w.out_bias);
}

Var predict_da_type(Var state, Var ext_memory, Var value_memory,
                    const MlpWeights& w) {
  std::vector<Var> parts{state};
  if (ext_memory.valid()) parts.push_back(ext_memory);
  if (value_memory.valid()) parts.push_back(value_memory);
  return softmax(mlp_logits(concat(parts), w));
}

Var predict_mask(Var state, Var ext_memory, Var value_row, const MlpWeights& w,
                 MaskHeadInputs inputs) {
  std::vector<Var> parts;
  if (inputs == MaskHeadInputs::kFormula) {
    parts.push_back(ext_memory.valid() ? ext_memory : state);
  } else {
    parts.push_back(state);
    if (ext_memory.valid()) parts.push_back(ext_memory);
    if (value_row.valid()) parts.push_back(value_row);
  }
  return sigmoid(mlp_logits(concat(parts), w));
}

Var predict_slot_value(Var slot_key, Var value_row, const MlpWeights& w) {
  return softmax(mlp_logits(concat({slot_key, value_row}), w));
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

DialogueAct assemble_act(const HeadOutputs& heads, double threshold) {
  DialogueAct act;
  act.type = argmax(heads.act_type.span());
  const std::size_t n = heads.mask.size();
  act.mask.assign(n, 0);
  act.values.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    if (heads.mask[i] > threshold) {
      act.mask[i] = 1;
      act.values[i] = argmax(heads.values.at(i).span());
    }
  }
  return act;
}

}  // namespace mad
