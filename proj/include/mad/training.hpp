// SPDX-License-Identifier: Apache-2.0
//
// Losses, string-match supervision, loss-weight schedule, Adam and the
// two-stage training loop (heuristic pretraining, then the main objective).
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mad/autodiff.hpp"
#include "mad/corpus_io.hpp"
#include "mad/model.hpp"

namespace mad {

enum class Precision { kF32, kF64 };

struct TrainConfig {
  double learning_rate = 0.002;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 15;
  std::size_t pretrain_epochs = 2;
  /// When true the pretraining epochs count against `epochs`.
  bool budget_includes_pretrain = true;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  ModelConfig model;
  bool rnn_only = false;
  InitScheme init = InitScheme::kUniform;
  Precision precision = Precision::kF32;
  std::string embeddings;  // optional "m |V|" embedding file

  std::size_t main_epochs() const;
  /// Model config with `rnn_only` folded in.
  ModelConfig resolved_model() const;
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Sets one key; throws ConfigError for unknown keys or bad values.
void set_config_value(TrainConfig& config, const std::string& key,
                      const std::string& value);
/// Applies a flat "key=value" text ('#' starts a comment) on top of `base`.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
/// Every key with its current value, one per line, in a stable order.
std::string config_to_text(const TrainConfig& config);

/// String-match supervision for one user utterance.
struct GoldSupervision {
  Tensor alpha;  // n_s x n; a matched row sums to 1, others are zero
  Tensor beta;   // n_s in {0, 1}
};

GoldSupervision derive_gold(const std::vector<std::string>& tokens,
                            const Ontology& ontology);

/// L = L^dat + gamma sum_i L^m(i) + lambda sum_{i: gold mask} L^v(i).
/// Mask and value terms are skipped when their weight is zero.
Var main_loss(const StepVars& step, const DialogueAct& gold, double gamma,
              double lambda);

/// Attention cross-entropy over matched rows plus gate binary
/// cross-entropy over all slots. Zero when the model has no value memory.
Var heuristic_loss(const StepVars& step, const GoldSupervision& gold);

/// (gamma, lambda) for main-stage epoch `epoch` (1-based).
std::pair<double, double> schedule(std::size_t epoch);

class Adam {
 public:
  Adam(const ParamStore& params, const TrainConfig& config);

  /// One bias-corrected update of every trainable parameter; missing
  /// gradients count as zero. Throws NumericalError naming the parameter
  /// when a gradient is not finite.
  void step(ParamStore& params, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based over all epochs
  std::string stage;      // "pretrain" or "main"
  double gamma = 0, lambda = 0;
  double train_loss = 0;  // mean per session
  double dev_loss = 0;    // main loss with gamma = lambda = 1
  double dev_overall_turn_acc = 0;

  std::string to_json() const;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::optional<std::size_t> best_epoch;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Builds the vocabulary from `data.corpus.train`, initializes a model and
/// trains it. Returns the parameters with the lowest dev loss among main
/// epochs (or the last state when there were none).
TrainResult train(const Dataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Session loss (sum over turns) on a fresh tape; used by tests.
Var session_loss(const Model& model, const BoundParams& p, const Session& session,
                 double gamma, double lambda, bool heuristic, bool main);

}  // namespace mad
