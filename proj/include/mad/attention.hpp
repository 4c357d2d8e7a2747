// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mad/autodiff.hpp"

namespace mad {

/// Shared scoring MLP: d(i, j) = v . tanh(A M^S(i) + B e_j + b).
/// [A | B] is the hidden layer acting on the concatenation [M^S(i); e_j].
struct AttentionWeights {
  Var slot_proj;   // m x m  (A)
  Var token_proj;  // m x m  (B)
  Var bias;        // m
  Var score;       // m      (v)
};

struct SlotAttention {
  Var weights;   // n_s x n  (alpha, each row a distribution over tokens)
  Var contexts;  // n_s x m  (c_i = sum_j alpha_ij e_j)
};

/// Raw scores d(i, j) as an [n_s x n] matrix.
Var attention_scores(Var slot_keys, Var tokens, const AttentionWeights& w);

/// `slot_keys` is [n_s x m], `tokens` [n x m] with n >= 1.
SlotAttention slot_attention(Var slot_keys, Var tokens,
                             const AttentionWeights& w);

}  // namespace mad
