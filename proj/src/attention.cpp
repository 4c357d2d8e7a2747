// SPDX-License-Identifier: Apache-2.0
#include "mad/attention.hpp"

#include "mad/error.hpp"

namespace mad {

Var attention_scores(Var slot_keys, Var tokens, const AttentionWeights& w) {
  const Tensor& keys = slot_keys.value();
  const Tensor& toks = tokens.value();
  if (toks.rank() != 2 || toks.rows() == 0) {
    throw ShapeError("slot_attention: utterance must hold at least one token, got " +
                     shape_str(toks.shape()));
  }
  if (keys.rank() != 2 || keys.cols() != toks.cols()) {
    throw ShapeError("slot_attention: slot keys " + shape_str(keys.shape()) +
                     " vs tokens " + shape_str(toks.shape()));
  }
  // Token projections are shared by every slot; only the slot half differs.
  Var token_part = add_row(matmul_nt(tokens, w.token_proj), w.bias);
  Var slot_part = matmul_nt(slot_keys, w.slot_proj);
  std::vector<Var> rows;
  rows.reserve(keys.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    Var hidden = tanh(add_row(token_part, row(slot_part, i)));
    rows.push_back(matvec(hidden, w.score));
  }
  return stack_rows(rows);
}

SlotAttention slot_attention(Var slot_keys, Var tokens,
                             const AttentionWeights& w) {
  Var alpha = softmax(attention_scores(slot_keys, tokens, w));
  Var contexts = matmul(alpha, tokens);
  return {alpha, contexts};
}

}  // namespace mad
