// SPDX-License-Identifier: Apache-2.0
//
// The dialogue manager: a GRU controller that reads a slot-value memory and an
// external memory, writes both after its state update, and feeds three
// prediction heads. Parameters live in a ParamStore; a turn is computed on a
// Tape so the same code serves training (recording) and inference.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mad/attention.hpp"
#include "mad/autodiff.hpp"
#include "mad/external_memory.hpp"
#include "mad/gru.hpp"
#include "mad/heads.hpp"
#include "mad/ontology.hpp"
#include "mad/slot_memory.hpp"
#include "mad/text.hpp"

namespace mad {

enum class InitScheme { kUniform, kNormal01 };

struct ModelConfig {
  std::size_t m = 128;
  std::size_t n_e = 8;
  std::size_t max_tokens = 64;
  // Ablations. MAD-SM drops the value memory, MAD-EM the external memory,
  // MAD-Attn replaces the per-slot context by the mean utterance embedding.
  bool no_value_memory = false;
  bool no_attention = false;
  bool no_external_memory = false;
  MaskHeadInputs mask_inputs = MaskHeadInputs::kProse;

  bool has_value_memory() const { return !no_value_memory; }
  bool has_external_memory() const { return !no_external_memory; }
  bool has_attention() const { return !no_value_memory && !no_attention; }
  /// Throws ConfigError on zero sizes or n_e outside 1..64.
  void validate() const;
  /// "MAD", "MAD-SM", "MAD-EM", "MAD-Attn", "RNN" or a '+' joined mix.
  std::string variant_name() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter tensors bound to one tape.
struct BoundParams {
  Var embedding;  // |V| x m
  Var slot_keys;  // n_s x m, frozen
  GruWeights gru;
  AttentionWeights attention;   // unset without attention
  GateWeights gates;            // unset without value memory
  ExternalMemoryWeights ext;    // unset without external memory
  Var ext_init;                 // n_e x m
  MlpWeights act_head;
  std::vector<MlpWeights> mask_heads;
  std::vector<MlpWeights> value_heads;
};

/// Recurrent state on a tape. Ablated components are invalid Vars.
struct StateVars {
  Var state;          // S, m
  Var value_memory;   // M^V, n_s x m
  Var ext_memory;     // M^E, n_e x m
  Var read_weights;   // w^r, n_e
};

/// Which outputs a step must produce. Pretraining needs only attention and
/// gates; training with gamma = 0 skips the mask heads; value heads are only
/// needed for slots the gold act masks.
struct StepNeeds {
  bool recurrent = true;
  bool act_type = true;
  bool mask = true;
  std::vector<char> values;  // per slot; empty means all

  static StepNeeds all() { return {}; }
  static StepNeeds heuristic_only() { return {false, false, false, {}}; }
};

struct StepVars {
  StateVars next;
  Var attention;  // n_s x n (invalid without attention)
  Var contexts;   // n_s x m
  Var gates;      // n_s
  Var read_value;     // r^V
  Var read_external;  // r^E
  Var act_type;       // n_dat
  Var mask;           // n_s
  std::vector<Var> values;  // per slot, invalid when not requested
};

/// Token ids of one turn after tokenization, UNK substitution and truncation.
struct EncodedTurn {
  std::vector<std::string> user_tokens;
  std::vector<int> user_ids;
  std::vector<int> prev_ids;
  bool truncated = false;
};

/// Plain-value recurrent state carried between turns at inference time.
struct DialogueMemoryState {
  Tensor state;
  Tensor value_memory;
  Tensor ext_memory;
  Tensor read_weights;
  std::size_t turn = 0;

  friend bool operator==(const DialogueMemoryState&,
                         const DialogueMemoryState&) = default;
};

/// Per-turn diagnostics.
struct TurnTrace {
  std::vector<std::string> tokens;
  bool truncated = false;
  Tensor attention;  // n_s x n; empty without attention
  Tensor gates;      // n_s; empty without value memory
  Tensor read_value;
  Tensor read_external;
  HeadOutputs heads;
  DialogueAct act;
};

class Model {
 public:
  Model(Ontology ontology, Vocabulary vocab, ModelConfig config);

  /// Random weights, zero padding row, then the frozen slot-key snapshot.
  void initialize(std::uint64_t seed, InitScheme scheme = InitScheme::kUniform);
  /// Rounds every parameter to the nearest float.
  void quantize_to_float();
  /// Recomputes M^S from the current embedding table.
  void snapshot_slot_keys();

  const Ontology& ontology() const { return ontology_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t embedding_index() const { return ids_.embedding; }
  std::size_t slot_keys_index() const { return ids_.slot_keys; }

  BoundParams bind(Tape& tape) const;
  EncodedTurn encode(const std::string& user, const std::string& system_prev) const;

  StateVars initial_state(Tape& tape, const BoundParams& p) const;
  StepVars step(const BoundParams& p, const StateVars& prev,
                const EncodedTurn& turn, const StepNeeds& needs = {}) const;

  DialogueMemoryState initial_state() const;
  /// One inference step; `prev` is not modified.
  DialogueMemoryState step(const DialogueMemoryState& prev,
                           const std::string& user,
                           const std::string& system_prev,
                           TurnTrace* trace = nullptr) const;

 private:
  struct Ids {
    std::size_t embedding = 0, slot_keys = 0;
    std::size_t gru[9] = {};
    std::size_t attention[4] = {};
    std::size_t gates[3] = {};
    std::size_t ext[5] = {};
    std::size_t ext_init = 0;
    std::array<std::size_t, 4> act_head{};
    std::vector<std::array<std::size_t, 4>> mask_heads, value_heads;
  };

  void allocate();
  std::array<std::size_t, 4> add_mlp(const std::string& prefix, std::size_t in,
                                     std::size_t out);
  std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                                 bool& truncated) const;

  Ontology ontology_;
  Vocabulary vocab_;
  ModelConfig config_;
  ParamStore params_;
  Ids ids_;
};

}  // namespace mad
