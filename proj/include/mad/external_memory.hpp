// SPDX-License-Identifier: Apache-2.0
//
// External memory with n_e units of width m. Reads use a gated content
// address carried across turns; writes erase then add, each unit weighted by
// its own read weight.
#pragma once

#include "mad/autodiff.hpp"

namespace mad {

struct ExternalMemoryWeights {
  Var read_gate;      // n_e x m   (g = sigmoid(W_g S_{t-1}))
  Var address_unit;   // m         (v over the memory unit)
  Var address_state;  // m         (v over the controller state)
  Var erase;          // m x m
  Var add;            // m x m
};

struct ExternalRead {
  Var content;  // r^E, [m]
  Var weights;  // w^r_t, [n_e]
};

/// w~ = softmax_i(v . [M(i); S]);  g = sigmoid(W_g S)
/// w = g * w_prev + (1 - g) * w~;  r = sum_i w(i) M(i)
ExternalRead read_external(Var memory, Var prev_state, Var prev_weights,
                           const ExternalMemoryWeights& w);

/// M'(i) = M(i) * (1 - w(i) mu_e) + w(i) mu_a with mu_e = sigmoid(W_e S),
/// mu_a = sigmoid(W_a S).
Var write_external(Var memory, Var state, Var read_weights,
                   const ExternalMemoryWeights& w);

}  // namespace mad
