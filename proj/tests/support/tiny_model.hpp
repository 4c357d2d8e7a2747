// SPDX-License-Identifier: Apache-2.0
//
// A miniature two-slot domain and model for gradient and wiring checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mad/model.hpp"
#include "mad/training.hpp"

namespace mad::test {

inline Ontology tiny_ontology() {
  Ontology o;
  o.slots = {{"Color", {"red", "blue", "green"}}, {"Shape", {"circle", "square"}}};
  o.act_types = {"ask_color", "ask_shape", "done"};
  o.validate();
  return o;
}

inline DialogueAct tiny_act(const Ontology& o, std::size_t type, int color, int shape) {
  DialogueAct a = DialogueAct::empty(o, type);
  if (color >= 0) a.set(0, static_cast<std::size_t>(color));
  if (shape >= 0) a.set(1, static_cast<std::size_t>(shape));
  return a;
}

inline Session tiny_session(const Ontology& o) {
  return {"tiny-1",
          {Turn{"i want red please", "", tiny_act(o, 1, 0, -1)},
           Turn{"a square one", "what shape do you want", tiny_act(o, 2, 0, 1)}}};
}

/// Vocabulary of exactly `size` entries (corpus tokens plus fillers).
inline Vocabulary tiny_vocab(const Ontology& o, std::size_t size = 20) {
  Vocabulary v = Vocabulary::build({tiny_session(o)}, o);
  for (int k = 0; v.size() < size; ++k) v.add("filler" + std::to_string(k));
  return v;
}

/// Model with parameters drawn from U(-scale, scale); large enough for
/// non-vanishing gradients, small enough to keep nonlinearities unsaturated.
inline Model tiny_model(ModelConfig config = {}, std::uint64_t seed = 3, double scale = 0.5) {
  config.m = config.m == 128 ? 8 : config.m;
  config.n_e = config.n_e == 8 ? 3 : config.n_e;
  const Ontology o = tiny_ontology();
  Model model(o, tiny_vocab(o), config);
  model.initialize(seed);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : model.params().all()) {
    if (!p.trainable) continue;
    for (auto& x : p.value.values()) x = u(gen);
  }
  auto pad = model.params()[model.embedding_index()].value.row(Vocabulary::kPad);
  std::fill(pad.begin(), pad.end(), 0.0);
  model.snapshot_slot_keys();
  return model;
}

struct ModelGroupError {
  std::string name;
  double rel = 0;
  double norm = 0;
};

/// Central differences on the full session loss (main + heuristic,
/// gamma = lambda = 1) for every trainable parameter group.
inline std::vector<ModelGroupError> model_gradcheck(Model& model, const Session& session,
                                                    double h = 1e-4) {
  auto loss_value = [&] {
    Tape tape(false);
    return session_loss(model, model.bind(tape), session, 1.0, 1.0, true, true).value()[0];
  };
  Gradients grads(model.params().size());
  {
    Tape tape;
    const Var loss = session_loss(model, model.bind(tape), session, 1.0, 1.0, true, true);
    tape.backward(loss, grads);
  }
  std::vector<ModelGroupError> out;
  for (auto& p : model.params().all()) {
    if (!p.trainable) continue;
    const Tensor* g = grads.get(p.index);
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double saved = p.value[k];
      p.value[k] = saved + h;
      const double up = loss_value();
      p.value[k] = saved - h;
      const double down = loss_value();
      p.value[k] = saved;
      const double num = (up - down) / (2 * h);
      const double ana = g ? (*g)[k] : 0.0;
      diff2 += (ana - num) * (ana - num);
      a2 += ana * ana;
      n2 += num * num;
    }
    // The floor keeps groups whose true gradient is zero (for example the
    // state term of the external address, which the softmax cancels) from
    // turning rounding noise into a relative error of 1.
    const double denom = std::max(std::sqrt(a2) + std::sqrt(n2), 1e-7);
    out.push_back({p.name, std::sqrt(diff2) / denom, std::sqrt(n2)});
  }
  return out;
}

}  // namespace mad::test
