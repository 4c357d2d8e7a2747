// SPDX-License-Identifier: Apache-2.0
#include "mad/model.hpp"

#include "mad/error.hpp"
#include "mad/rng.hpp"

namespace mad {

void ModelConfig::validate() const {
  if (m == 0) throw ConfigError("m must be positive");
  if (n_e == 0 || n_e > 64) throw ConfigError("n_e must be in 1..64");
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
}

std::string ModelConfig::variant_name() const {
  if (no_value_memory && no_external_memory) return "RNN";  // attention needs the value memory
  std::string name = "MAD";
  if (no_value_memory) name += "-SM";
  if (no_external_memory) name += "-EM";
  if (no_attention) name += "-Attn";
  return name;
}

Model::Model(Ontology ontology, Vocabulary vocab, ModelConfig config)
    : ontology_(std::move(ontology)), vocab_(std::move(vocab)), config_(config) {
  ontology_.validate();
  config_.validate();
  allocate();
}

std::array<std::size_t, 4> Model::add_mlp(const std::string& prefix,
                                          std::size_t in, std::size_t out) {
  const std::size_t m = config_.m;
  return {params_.add(prefix + ".w1", {m, in}), params_.add(prefix + ".b1", {m}),
          params_.add(prefix + ".w2", {out, m}), params_.add(prefix + ".b2", {out})};
}

void Model::allocate() {
  const std::size_t m = config_.m, ns = ontology_.slot_count(), ne = config_.n_e;
  ids_.embedding = params_.add("embedding", {vocab_.size(), m});
  ids_.slot_keys = params_.add("slot_keys", {ns, m}, /*trainable=*/false);
  const char* gates[3] = {"z", "r", "h"};
  for (int g = 0; g < 3; ++g) {
    ids_.gru[3 * g] = params_.add(std::string("gru.w_") + gates[g], {m, 4 * m});
    ids_.gru[3 * g + 1] = params_.add(std::string("gru.u_") + gates[g], {m, m});
    ids_.gru[3 * g + 2] = params_.add(std::string("gru.b_") + gates[g], {m});
  }
  if (config_.has_attention()) {
    ids_.attention[0] = params_.add("attn.slot_proj", {m, m});
    ids_.attention[1] = params_.add("attn.token_proj", {m, m});
    ids_.attention[2] = params_.add("attn.bias", {m});
    ids_.attention[3] = params_.add("attn.score", {m});
  }
  if (config_.has_value_memory()) {
    ids_.gates[0] = params_.add("gate.prev_response", {ns, m});
    ids_.gates[1] = params_.add("gate.context", {ns, m});
    ids_.gates[2] = params_.add("gate.bias", {ns});
  }
  if (config_.has_external_memory()) {
    ids_.ext[0] = params_.add("ext.read_gate", {ne, m});
    ids_.ext[1] = params_.add("ext.address_unit", {m});
    ids_.ext[2] = params_.add("ext.address_state", {m});
    ids_.ext[3] = params_.add("ext.erase", {m, m});
    ids_.ext[4] = params_.add("ext.add", {m, m});
    ids_.ext_init = params_.add("ext.init", {ne, m});
  }
  const std::size_t ext_blocks = config_.has_external_memory() ? ne : 0;
  const std::size_t value_blocks = config_.has_value_memory() ? ns : 0;
  ids_.act_head = add_mlp("head.act", m * (1 + ext_blocks + value_blocks),
                          ontology_.act_count());
  const std::size_t mask_in = config_.mask_inputs == MaskHeadInputs::kFormula
                                  ? m * std::max<std::size_t>(ext_blocks, 1)
                                  : m * (2 + ext_blocks);
  for (const auto& slot : ontology_.slots) {
    ids_.mask_heads.push_back(add_mlp("head.mask." + slot.name, mask_in, 1));
  }
  for (const auto& slot : ontology_.slots) {
    ids_.value_heads.push_back(
        add_mlp("head.value." + slot.name, 2 * m, slot.values.size()));
  }
}

void Model::initialize(std::uint64_t seed, InitScheme scheme) {
  Rng rng(seed);
  for (auto& p : params_.all()) {
    if (!p.trainable) continue;
    for (auto& x : p.value.values()) {
      x = scheme == InitScheme::kUniform ? rng.uniform(-0.08, 0.08) : rng.normal();
    }
  }
  auto pad = params_[ids_.embedding].value.row(Vocabulary::kPad);
  std::fill(pad.begin(), pad.end(), 0.0);
  snapshot_slot_keys();
}

void Model::quantize_to_float() {
  for (auto& p : params_.all()) {
    for (auto& x : p.value.values()) x = static_cast<double>(static_cast<float>(x));
  }
}

void Model::snapshot_slot_keys() {
  params_[ids_.slot_keys].value =
      init_slot_keys(ontology_, vocab_, params_[ids_.embedding].value);
}

BoundParams Model::bind(Tape& tape) const {
  auto P = [&](std::size_t i) { return tape.param(params_[i]); };
  auto mlp = [&](const std::array<std::size_t, 4>& ids) {
    return MlpWeights{P(ids[0]), P(ids[1]), P(ids[2]), P(ids[3])};
  };
  BoundParams b;
  b.embedding = P(ids_.embedding);
  b.slot_keys = P(ids_.slot_keys);
  b.gru = {P(ids_.gru[0]), P(ids_.gru[1]), P(ids_.gru[2]),
           P(ids_.gru[3]), P(ids_.gru[4]), P(ids_.gru[5]),
           P(ids_.gru[6]), P(ids_.gru[7]), P(ids_.gru[8])};
  if (config_.has_attention()) {
    b.attention = {P(ids_.attention[0]), P(ids_.attention[1]),
                   P(ids_.attention[2]), P(ids_.attention[3])};
  }
  if (config_.has_value_memory()) {
    b.gates = {P(ids_.gates[0]), P(ids_.gates[1]), P(ids_.gates[2])};
  }
  if (config_.has_external_memory()) {
    b.ext = {P(ids_.ext[0]), P(ids_.ext[1]), P(ids_.ext[2]), P(ids_.ext[3]),
             P(ids_.ext[4])};
    b.ext_init = P(ids_.ext_init);
  }
  b.act_head = mlp(ids_.act_head);
  for (const auto& ids : ids_.mask_heads) b.mask_heads.push_back(mlp(ids));
  for (const auto& ids : ids_.value_heads) b.value_heads.push_back(mlp(ids));
  return b;
}

std::vector<int> Model::encode_tokens(const std::vector<std::string>& tokens,
                                      bool& truncated) const {
  std::vector<int> ids = vocab_.encode(tokens);
  if (ids.size() > config_.max_tokens) {
    ids.resize(config_.max_tokens);
    truncated = true;
  }
  return ids;
}

EncodedTurn Model::encode(const std::string& user,
                          const std::string& system_prev) const {
  EncodedTurn e;
  e.user_tokens = tokenize(user);
  if (e.user_tokens.empty()) e.user_tokens.push_back(vocab_.token(Vocabulary::kUnk));
  e.user_ids = encode_tokens(e.user_tokens, e.truncated);
  e.user_tokens.resize(e.user_ids.size());
  e.prev_ids = encode_tokens(tokenize(system_prev), e.truncated);
  return e;
}

StateVars Model::initial_state(Tape& tape, const BoundParams& p) const {
  const std::size_t m = config_.m, ns = ontology_.slot_count(), ne = config_.n_e;
  StateVars s;
  s.state = tape.constant(Tensor::zeros({m}));
  if (config_.has_value_memory()) s.value_memory = tape.constant(Tensor::zeros({ns, m}));
  if (config_.has_external_memory()) {
    s.ext_memory = p.ext_init;
    s.read_weights = tape.constant(Tensor(Shape{ne}, std::vector<double>(ne, 1.0 / ne)));
  }
  return s;
}

StepVars Model::step(const BoundParams& p, const StateVars& prev,
                     const EncodedTurn& turn, const StepNeeds& needs) const {
  const std::size_t ns = ontology_.slot_count();
  StepVars out;
  const Var tokens = gather_rows(p.embedding, turn.user_ids);
  const Var x_mean = mean_rows(tokens);
  const Var y_mean = embed_utterance(p.embedding, turn.prev_ids);

  ExternalRead ext_read;
  if (needs.recurrent) {
    out.read_value = config_.has_value_memory() ? read_value_memory(prev.value_memory)
                                                : prev.state;
    if (config_.has_external_memory()) {
      ext_read = read_external(prev.ext_memory, prev.state, prev.read_weights, p.ext);
      out.read_external = ext_read.content;
    } else {
      out.read_external = prev.state;
    }
    out.next.state = gru_cell(concat({x_mean, y_mean, out.read_value, out.read_external}),
                              prev.state, p.gru);
  }

  if (config_.has_value_memory()) {
    if (config_.has_attention()) {
      const SlotAttention att = slot_attention(p.slot_keys, tokens, p.attention);
      out.attention = att.weights;
      out.contexts = att.contexts;
    } else {
      out.contexts = stack_rows(std::vector<Var>(ns, x_mean));
    }
    out.gates = update_gates(y_mean, out.contexts, p.gates);
  }
  if (!needs.recurrent) return out;

  const Var s = out.next.state;
  if (config_.has_value_memory()) {
    out.next.value_memory = write_value_memory(prev.value_memory, out.gates, out.contexts);
  }
  if (config_.has_external_memory()) {
    out.next.ext_memory = write_external(prev.ext_memory, s, ext_read.weights, p.ext);
    out.next.read_weights = ext_read.weights;
  }

  const Var ext = out.next.ext_memory;
  auto value_row = [&](std::size_t i) {
    return config_.has_value_memory() ? row(out.next.value_memory, i) : s;
  };
  if (needs.act_type) {
    out.act_type = predict_da_type(s, ext, out.next.value_memory, p.act_head);
  }
  if (needs.mask) {
    std::vector<Var> probs;
    probs.reserve(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      probs.push_back(predict_mask(s, ext, value_row(i), p.mask_heads[i],
                                   config_.mask_inputs));
    }
    out.mask = concat(probs);
  }
  out.values.resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    if (!needs.values.empty() && !needs.values[i]) continue;
    out.values[i] = predict_slot_value(row(p.slot_keys, i), value_row(i), p.value_heads[i]);
  }
  return out;
}

DialogueMemoryState Model::initial_state() const {
  const std::size_t m = config_.m, ns = ontology_.slot_count(), ne = config_.n_e;
  DialogueMemoryState s;
  s.state = Tensor::zeros({m});
  if (config_.has_value_memory()) s.value_memory = Tensor::zeros({ns, m});
  if (config_.has_external_memory()) {
    s.ext_memory = params_[ids_.ext_init].value;
    s.read_weights = Tensor(Shape{ne}, std::vector<double>(ne, 1.0 / ne));
  }
  return s;
}

DialogueMemoryState Model::step(const DialogueMemoryState& prev,
                                const std::string& user,
                                const std::string& system_prev,
                                TurnTrace* trace) const {
  Tape tape(/*record=*/false);
  const BoundParams p = bind(tape);
  StateVars vars;
  vars.state = tape.constant(prev.state);
  if (config_.has_value_memory()) vars.value_memory = tape.constant(prev.value_memory);
  if (config_.has_external_memory()) {
    vars.ext_memory = tape.constant(prev.ext_memory);
    vars.read_weights = tape.constant(prev.read_weights);
  }
  const EncodedTurn enc = encode(user, system_prev);
  const StepVars out = step(p, vars, enc, StepNeeds::all());

  DialogueMemoryState next;
  next.state = out.next.state.value();
  if (config_.has_value_memory()) next.value_memory = out.next.value_memory.value();
  if (config_.has_external_memory()) {
    next.ext_memory = out.next.ext_memory.value();
    next.read_weights = out.next.read_weights.value();
  }
  next.turn = prev.turn + 1;

  if (trace) {
    trace->tokens = enc.user_tokens;
    trace->truncated = enc.truncated;
    trace->attention = out.attention.valid() ? out.attention.value() : Tensor();
    trace->gates = out.gates.valid() ? out.gates.value() : Tensor();
    trace->read_value = out.read_value.value();
    trace->read_external = out.read_external.value();
    trace->heads.act_type = out.act_type.value();
    trace->heads.mask = out.mask.value();
    trace->heads.values.clear();
    for (const auto& v : out.values) trace->heads.values.push_back(v.value());
    trace->act = assemble_act(trace->heads);
  }
  return next;
}

}  // namespace mad
