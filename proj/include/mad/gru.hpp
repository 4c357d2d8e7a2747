// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mad/autodiff.hpp"

namespace mad {

/// Weights of one GRU cell bound to a tape. W_* act on the input (m x k),
/// U_* on the hidden state (m x m), b_* are biases (m).
struct GruWeights {
  Var w_update, u_update, b_update;
  Var w_reset, u_reset, b_reset;
  Var w_cand, u_cand, b_cand;
};

/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// c = tanh(W_h x + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * c
Var gru_cell(Var input, Var hidden, const GruWeights& w);

}  // namespace mad
