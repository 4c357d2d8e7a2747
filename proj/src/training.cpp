// SPDX-License-Identifier: Apache-2.0
#include "mad/training.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "mad/error.hpp"
#include "mad/evaluation.hpp"
#include "mad/rng.hpp"

namespace mad {

// ---------------------------------------------------------------------------
// config

std::size_t TrainConfig::main_epochs() const {
  if (!budget_includes_pretrain) return epochs;
  return epochs > pretrain_epochs ? epochs - pretrain_epochs : 0;
}

ModelConfig TrainConfig::resolved_model() const {
  ModelConfig m = model;
  if (rnn_only) {
    m.no_value_memory = true;
    m.no_external_memory = true;
  }
  return m;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw ConfigError("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  resolved_model().validate();
}

namespace {

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (v.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest decimal that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "learning_rate") c.learning_rate = parse_double(key, v);
  else if (key == "adam_beta1") c.adam_beta1 = parse_double(key, v);
  else if (key == "adam_beta2") c.adam_beta2 = parse_double(key, v);
  else if (key == "adam_eps") c.adam_eps = parse_double(key, v);
  else if (key == "epochs") c.epochs = parse_uint(key, v);
  else if (key == "pretrain_epochs") c.pretrain_epochs = parse_uint(key, v);
  else if (key == "budget_includes_pretrain") c.budget_includes_pretrain = parse_bool(key, v);
  else if (key == "batch_size") c.batch_size = parse_uint(key, v);
  else if (key == "seed") c.seed = parse_uint(key, v);
  else if (key == "m") c.model.m = parse_uint(key, v);
  else if (key == "n_e") c.model.n_e = parse_uint(key, v);
  else if (key == "max_tokens") c.model.max_tokens = parse_uint(key, v);
  else if (key == "no_slot_value_memory") c.model.no_value_memory = parse_bool(key, v);
  else if (key == "no_attention") c.model.no_attention = parse_bool(key, v);
  else if (key == "no_external_memory") c.model.no_external_memory = parse_bool(key, v);
  else if (key == "rnn_only") c.rnn_only = parse_bool(key, v);
  else if (key == "mask_head_inputs") {
    if (v == "prose") c.model.mask_inputs = MaskHeadInputs::kProse;
    else if (v == "formula") c.model.mask_inputs = MaskHeadInputs::kFormula;
    else throw ConfigError("mask_head_inputs must be prose or formula, got '" + v + "'");
  } else if (key == "paper_init") {
    if (v == "normal01") c.init = InitScheme::kNormal01;
    else if (v == "off" || v == "uniform") c.init = InitScheme::kUniform;
    else throw ConfigError("paper_init must be normal01 or off, got '" + v + "'");
  } else if (key == "precision") {
    if (v == "f32") c.precision = Precision::kF32;
    else if (v == "f64") c.precision = Precision::kF64;
    else throw ConfigError("precision must be f32 or f64, got '" + v + "'");
  } else if (key == "embeddings") c.embeddings = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

std::string config_to_text(const TrainConfig& c) {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  std::string out;
  auto put = [&out](const char* k, const std::string& v) { out += std::string(k) + "=" + v + "\n"; };
  put("learning_rate", num(c.learning_rate));
  put("adam_beta1", num(c.adam_beta1));
  put("adam_beta2", num(c.adam_beta2));
  put("adam_eps", num(c.adam_eps));
  put("epochs", std::to_string(c.epochs));
  put("pretrain_epochs", std::to_string(c.pretrain_epochs));
  put("budget_includes_pretrain", b(c.budget_includes_pretrain));
  put("batch_size", std::to_string(c.batch_size));
  put("seed", std::to_string(c.seed));
  put("m", std::to_string(c.model.m));
  put("n_e", std::to_string(c.model.n_e));
  put("max_tokens", std::to_string(c.model.max_tokens));
  put("no_slot_value_memory", b(c.model.no_value_memory));
  put("no_attention", b(c.model.no_attention));
  put("no_external_memory", b(c.model.no_external_memory));
  put("rnn_only", b(c.rnn_only));
  put("mask_head_inputs", c.model.mask_inputs == MaskHeadInputs::kProse ? "prose" : "formula");
  put("paper_init", c.init == InitScheme::kNormal01 ? "normal01" : "off");
  put("precision", c.precision == Precision::kF32 ? "f32" : "f64");
  put("embeddings", c.embeddings);
  return out;
}

// ---------------------------------------------------------------------------
// supervision and losses

GoldSupervision derive_gold(const std::vector<std::string>& tokens,
                            const Ontology& ontology) {
  const std::size_t ns = ontology.slot_count();
  const std::size_t n = std::max<std::size_t>(tokens.size(), 1);
  GoldSupervision g{Tensor::zeros({ns, n}), Tensor::zeros({ns})};
  for (std::size_t i = 0; i < ns; ++i) {
    const auto& values = ontology.slots[i].values;
    const std::unordered_set<std::string> set(values.begin(), values.end());
    std::size_t hits = 0;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      if (set.count(tokens[j])) {
        g.alpha.at(i, j) = 1.0;
        ++hits;
      }
    }
    if (hits == 0) continue;
    for (std::size_t j = 0; j < n; ++j) g.alpha.at(i, j) /= static_cast<double>(hits);
    g.beta[i] = 1.0;
  }
  return g;
}

Var main_loss(const StepVars& step, const DialogueAct& gold, double gamma,
              double lambda) {
  Var loss = cross_entropy(step.act_type, gold.type);
  if (gamma != 0.0) {
    Tensor target = Tensor::zeros({gold.mask.size()});
    for (std::size_t i = 0; i < gold.mask.size(); ++i) target[i] = gold.mask[i];
    loss = add(loss, scale(binary_cross_entropy(step.mask, target), gamma));
  }
  if (lambda != 0.0) {
    for (std::size_t i = 0; i < gold.mask.size(); ++i) {
      if (gold.mask[i] != 1) continue;
      if (!gold.values[i]) throw DataError("gold act masks a slot without a value");
      if (!step.values.at(i).valid()) {
        throw Error("main_loss: value head for a masked slot was not computed");
      }
      loss = add(loss, scale(cross_entropy(step.values[i], *gold.values[i]), lambda));
    }
  }
  return loss;
}

Var heuristic_loss(const StepVars& step, const GoldSupervision& gold) {
  if (!step.gates.valid()) return {};
  Var loss = binary_cross_entropy(step.gates, gold.beta);
  if (step.attention.valid()) {
    const std::size_t n = step.attention.value().cols();
    if (gold.alpha.cols() != n) {
      throw ShapeError("heuristic_loss: gold covers " + std::to_string(gold.alpha.cols()) +
                       " tokens, attention " + std::to_string(n));
    }
    for (std::size_t i = 0; i < gold.alpha.rows(); ++i) {
      if (gold.beta[i] == 0.0) continue;
      const auto r = gold.alpha.row(i);
      loss = add(loss, soft_cross_entropy(row(step.attention, i),
                                          Tensor({n}, std::vector<double>(r.begin(), r.end()))));
    }
  }
  return loss;
}

std::pair<double, double> schedule(std::size_t epoch) {
  const double e = static_cast<double>(epoch);
  const double lambda = std::min(e, 7.0) / 7.0;
  const double gamma = epoch <= 7 ? 0.0 : std::min(e - 7.0, 7.0) / 7.0;
  return {gamma, lambda};
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const ParamStore& params, const TrainConfig& config)
    : lr_(config.learning_rate),
      b1_(config.adam_beta1),
      b2_(config.adam_beta2),
      eps_(config.adam_eps) {
  for (const auto& p : params.all()) {
    m_.push_back(Tensor::zeros(p.value.shape()));
    v_.push_back(Tensor::zeros(p.value.shape()));
  }
}

void Adam::step(ParamStore& params, const Gradients& grads) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor* g = grads.get(i);
    if (g && !g->all_finite()) {
      throw NumericalError("non-finite gradient for parameter '" + params[i].name + "'");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) continue;
    const Tensor* g = grads.get(i);
    double* w = p.value.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const std::size_t n = p.value.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double gk = g ? (*g)[k] : 0.0;
      m[k] = b1_ * m[k] + (1.0 - b1_) * gk;
      v[k] = b2_ * v[k] + (1.0 - b2_) * gk * gk;
      w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// training loop

std::string EpochLog::to_json() const {
  return nlohmann::ordered_json{{"epoch", epoch},
                                {"stage", stage},
                                {"gamma", gamma},
                                {"lambda", lambda},
                                {"train_loss", train_loss},
                                {"dev_loss", dev_loss},
                                {"dev_overall_turn_acc", dev_overall_turn_acc}}
      .dump();
}

namespace {

struct Prepared {
  std::vector<EncodedTurn> turns;
  std::vector<GoldSupervision> gold;
};

std::vector<Prepared> prepare(const Model& model, const std::vector<Session>& split) {
  std::vector<Prepared> out;
  out.reserve(split.size());
  for (const auto& s : split) {
    Prepared p;
    for (const auto& t : s.turns) {
      p.turns.push_back(model.encode(t.user, t.system_prev));
      p.gold.push_back(derive_gold(p.turns.back().user_tokens, model.ontology()));
    }
    out.push_back(std::move(p));
  }
  return out;
}

Var accumulate(Var total, Var term) {
  if (!term.valid()) return total;
  return total.valid() ? add(total, term) : term;
}

enum class Objective { kHeuristic, kMain, kBoth };

// Forward pass over one session. With `predictions` the step computes every
// head and records the committed act of each turn.
Var run_session(const Model& model, const BoundParams& p, const Session& session,
                const Prepared& prep, Objective objective, double gamma,
                double lambda, std::vector<TurnPrediction>* predictions) {
  Tape& tape = *p.embedding.tape;
  const std::size_t ns = model.ontology().slot_count();
  Var total;
  if (objective == Objective::kHeuristic && !predictions) {
    for (std::size_t t = 0; t < session.turns.size(); ++t) {
      const StepVars out = model.step(p, {}, prep.turns[t], StepNeeds::heuristic_only());
      total = accumulate(total, heuristic_loss(out, prep.gold[t]));
    }
    return total;
  }
  StateVars state = model.initial_state(tape, p);
  for (std::size_t t = 0; t < session.turns.size(); ++t) {
    const DialogueAct& gold = session.turns[t].act;
    StepNeeds needs;
    if (!predictions) {
      needs.mask = gamma != 0.0;
      needs.values.assign(ns, 0);
      if (lambda != 0.0) {
        for (std::size_t i = 0; i < ns; ++i) needs.values[i] = gold.mask[i] == 1;
      }
    }
    const StepVars out = model.step(p, state, prep.turns[t], needs);
    if (objective != Objective::kHeuristic) {
      total = accumulate(total, main_loss(out, gold, gamma, lambda));
    }
    if (objective != Objective::kMain) {
      total = accumulate(total, heuristic_loss(out, prep.gold[t]));
    }
    if (predictions) {
      HeadOutputs heads;
      heads.act_type = out.act_type.value();
      heads.mask = out.mask.value();
      for (const auto& v : out.values) heads.values.push_back(v.value());
      predictions->push_back(prediction_from_heads(heads));
    }
    state = out.next;
  }
  return total;
}

std::vector<Tensor> snapshot(const ParamStore& params) {
  std::vector<Tensor> out;
  for (const auto& p : params.all()) out.push_back(p.value);
  return out;
}

}  // namespace

Var session_loss(const Model& model, const BoundParams& p, const Session& session,
                 double gamma, double lambda, bool heuristic, bool main) {
  const Prepared prep = std::move(prepare(model, {session}).front());
  const Objective obj = heuristic && main ? Objective::kBoth
                        : heuristic       ? Objective::kHeuristic
                                          : Objective::kMain;
  std::vector<TurnPrediction> preds;
  // Full forward (all heads) so every parameter group is reachable.
  return run_session(model, p, session, prep, obj, gamma, lambda, &preds);
}

TrainResult train(const Dataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.corpus.train.empty()) throw DataError("training split is empty");
  if (data.corpus.dev.empty()) throw DataError("dev split is empty");

  Model model(data.ontology, Vocabulary::build(data.corpus.train, data.ontology),
              config.resolved_model());
  model.initialize(config.seed, config.init);
  if (!config.embeddings.empty()) {
    load_embeddings(config.embeddings, model.vocab(),
                    model.params()[model.embedding_index()].value);
    model.snapshot_slot_keys();
  }
  const bool f32 = config.precision == Precision::kF32;
  if (f32) model.quantize_to_float();

  TrainResult result{model, {}, std::nullopt};
  const std::size_t pretrain =
      config.budget_includes_pretrain ? std::min(config.pretrain_epochs, config.epochs)
                                      : config.pretrain_epochs;
  const std::size_t total = pretrain + config.main_epochs();
  if (total == 0) return result;

  const auto train_prep = prepare(model, data.corpus.train);
  const auto dev_prep = prepare(model, data.corpus.dev);
  Adam adam(model.params(), config);
  Rng order_rng(derive_seed(config.seed, 0x5e55));
  std::vector<std::size_t> order(data.corpus.train.size());
  double best_loss = 0;
  std::vector<Tensor> best_params;

  for (std::size_t epoch = 1; epoch <= total; ++epoch) {
    const bool pre = epoch <= pretrain;
    const auto [gamma, lambda] = pre ? std::pair{0.0, 0.0} : schedule(epoch - pretrain);
    const Objective objective = pre ? Objective::kHeuristic : Objective::kMain;

    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);
    double train_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Gradients grads(model.params().size());
      bool any = false;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t s = order[k];
        Tape tape;
        const BoundParams p = model.bind(tape);
        const Var loss = run_session(model, p, data.corpus.train[s], train_prep[s],
                                     objective, gamma, lambda, nullptr);
        if (!loss.valid()) continue;
        train_loss += loss.value()[0];
        tape.backward(loss, grads);
        any = true;
      }
      if (!any) continue;
      grads.scale(1.0 / static_cast<double>(end - start));
      adam.step(model.params(), grads);
      if (f32) model.quantize_to_float();
    }

    EpochLog log;
    log.epoch = epoch;
    log.stage = pre ? "pretrain" : "main";
    log.gamma = gamma;
    log.lambda = lambda;
    log.train_loss = train_loss / static_cast<double>(order.size());
    std::vector<SessionPredictions> dev_preds;
    double dev_loss = 0;
    for (std::size_t s = 0; s < data.corpus.dev.size(); ++s) {
      Tape tape(/*record=*/false);
      const BoundParams p = model.bind(tape);
      SessionPredictions sp;
      const Var loss = run_session(model, p, data.corpus.dev[s], dev_prep[s],
                                   Objective::kMain, 1.0, 1.0, &sp.turns);
      dev_loss += loss.value()[0];
      for (const auto& t : data.corpus.dev[s].turns) sp.gold.push_back(t.act);
      dev_preds.push_back(std::move(sp));
    }
    log.dev_loss = dev_loss / static_cast<double>(data.corpus.dev.size());
    log.dev_overall_turn_acc = score(model.ontology(), dev_preds).turn.overall;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (!pre && (!result.best_epoch || log.dev_loss < best_loss)) {
      best_loss = log.dev_loss;
      best_params = snapshot(model.params());
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch) {
    for (std::size_t i = 0; i < best_params.size(); ++i) {
      model.params()[i].value = std::move(best_params[i]);
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace mad
