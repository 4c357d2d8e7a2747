// SPDX-License-Identifier: Apache-2.0
//
// Slot-value memory: a frozen key matrix (one row per slot) paired with a
// dynamic value matrix M^V that is rewritten every turn through a per-slot
// gate.
#pragma once

#include "mad/autodiff.hpp"

namespace mad {

/// Per-slot gate parameters. Row i of [prev_response | context] is the
/// weight vector W^c_i acting on [y_{t-1}; c_i]; bias has one entry per slot.
struct GateWeights {
  Var prev_response;  // n_s x m
  Var context;        // n_s x m
  Var bias;           // n_s
};

/// Mean of the value-memory rows: [n_s x m] -> [m].
Var read_value_memory(Var value_memory);

/// beta_i = sigmoid(W^c_i [y; c_i] + b_i) for every slot at once.
/// `contexts` is [n_s x m]; returns [n_s].
Var update_gates(Var prev_response, Var contexts, const GateWeights& w);

/// Single-slot form of `update_gates`; returns a [1] tensor.
Var update_gate(Var prev_response, Var context, std::size_t slot,
                const GateWeights& w);

/// M'(i) = beta_i c_i + (1 - beta_i) M(i) for every slot.
Var write_value_memory(Var value_memory, Var gates, Var contexts);

/// Rewrites only row `slot`; `gate` is a [1] tensor and `context` [m].
Var write_value_memory_row(Var value_memory, std::size_t slot, Var gate,
                           Var context);

}  // namespace mad
