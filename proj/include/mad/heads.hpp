// SPDX-License-Identifier: Apache-2.0
//
// Output classifiers: act type, per-slot inclusion mask and per-slot value.
// Every head is a one-hidden-layer tanh MLP followed by softmax or sigmoid.
#pragma once

#include <vector>

#include "mad/autodiff.hpp"
#include "mad/ontology.hpp"

namespace mad {

struct MlpWeights {
  Var hidden;       // h x d
  Var hidden_bias;  // h
  Var out;          // k x h
  Var out_bias;     // k
};

/// Pre-activation output of the MLP: out * tanh(hidden * x + b) + b_out.
Var mlp_logits(Var input, const MlpWeights& w);

enum class MaskHeadInputs {
  kProse,    // [S_t; M^E(1..n_e); M^V(i)]
  kFormula,  // [M^E(1..n_e)]
};

/// Softmax over act types. Pass an invalid Var to leave out a memory block.
Var predict_da_type(Var state, Var ext_memory, Var value_memory,
                    const MlpWeights& w);

/// Probability that slot `slot` appears in the act, as a [1] tensor.
/// `value_row` may be an invalid Var when the value memory is ablated.
Var predict_mask(Var state, Var ext_memory, Var value_row, const MlpWeights& w,
                 MaskHeadInputs inputs = MaskHeadInputs::kProse);

/// Softmax over the values of one slot from [M^S(i); M^V(i)].
Var predict_slot_value(Var slot_key, Var value_row, const MlpWeights& w);

/// Plain-value head outputs for one turn.
struct HeadOutputs {
  Tensor act_type;               // n_dat
  Tensor mask;                   // n_s, each in (0, 1)
  std::vector<Tensor> values;    // per slot, n_i
};

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Act type = argmax; mask(i) = [p_i > threshold]; values only for masked
/// slots.
DialogueAct assemble_act(const HeadOutputs& heads, double threshold = 0.5);

}  // namespace mad
