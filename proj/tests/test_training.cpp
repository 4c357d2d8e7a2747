// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mad/error.hpp"
#include "mad/evaluation.hpp"
#include "mad/model_io.hpp"
#include "mad/training.hpp"
#include "support/small_data.hpp"
#include "support/tiny_model.hpp"

using namespace mad;

namespace {

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].value.values() != b[i].value.values()) return false;
  }
  return true;
}

}  // namespace

TEST(Schedule, RampsAsTabulated) {
  // (epoch, gamma, lambda)
  const double table[][3] = {{1, 0, 1.0 / 7}, {3, 0, 3.0 / 7}, {7, 0, 1},
                             {8, 1.0 / 7, 1}, {10, 3.0 / 7, 1}, {14, 1, 1},
                             {20, 1, 1}};
  for (const auto& row : table) {
    const auto [g, l] = schedule(static_cast<std::size_t>(row[0]));
    EXPECT_DOUBLE_EQ(g, row[1]) << "epoch " << row[0];
    EXPECT_DOUBLE_EQ(l, row[2]) << "epoch " << row[0];
  }
}

TEST(Config, BudgetSplitsPretrainAndMain) {
  TrainConfig c;
  EXPECT_EQ(c.main_epochs(), 13u);
  c.budget_includes_pretrain = false;
  EXPECT_EQ(c.main_epochs(), 15u);
}

TEST(Config, ParsesCommentsAndRejectsUnknownKeys) {
  const TrainConfig c = parse_config("# comment\nm = 32\nn_e=5\nlearning_rate=0.01\n\nseed=9\n");
  EXPECT_EQ(c.model.m, 32u);
  EXPECT_EQ(c.model.n_e, 5u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_THROW(parse_config("bogus=1"), ConfigError);
  EXPECT_THROW(parse_config("m=abc"), ConfigError);
  // Ranges are checked by validate(), which train() calls first.
  EXPECT_THROW(parse_config("n_e=0").validate(), ConfigError);
}

TEST(Config, TextRoundTrip) {
  TrainConfig c = test::small_config();
  c.model.no_attention = true;
  c.precision = Precision::kF64;
  EXPECT_EQ(parse_config(config_to_text(c)), c);
}

TEST(Supervision, StringMatchSpreadsMassOverMatches) {
  const Ontology o = test::tiny_ontology();
  const GoldSupervision g = derive_gold({"red", "or", "red", "square"}, o);
  ASSERT_EQ(g.alpha.rows(), 2u);
  ASSERT_EQ(g.alpha.cols(), 4u);
  const std::vector<double> color{0.5, 0, 0.5, 0};
  const std::vector<double> shape{0, 0, 0, 1};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(g.alpha.at(0, j), color[j]);
    EXPECT_DOUBLE_EQ(g.alpha.at(1, j), shape[j]);
  }
  EXPECT_EQ(g.beta.values(), (std::vector<double>{1, 1}));

  const GoldSupervision none = derive_gold({"hello"}, o);
  EXPECT_EQ(none.beta.values(), (std::vector<double>{0, 0}));
}

TEST(Losses, MainLossMatchesHandSum) {
  const Model model = test::tiny_model();
  const Ontology& o = model.ontology();
  const Session s = test::tiny_session(o);
  Tape tape(false);
  const BoundParams p = model.bind(tape);
  const StepVars out = model.step(p, model.initial_state(tape, p), model.encode(s.turns[1].user, s.turns[1].system_prev));
  const DialogueAct& gold = s.turns[1].act;
  const double gamma = 0.4, lambda = 0.7;
  double expected = -std::log(out.act_type.value()[gold.type]);
  for (std::size_t i = 0; i < 2; ++i) {
    const double q = out.mask.value()[i];
    expected -= gamma * (gold.mask[i] ? std::log(q) : std::log(1 - q));
    if (gold.mask[i]) expected -= lambda * std::log(out.values[i].value()[*gold.values[i]]);
  }
  EXPECT_NEAR(main_loss(out, gold, gamma, lambda).value()[0], expected, 1e-12);
}

TEST(Adam, MatchesScalarReference) {
  ParamStore store;
  store.add("w", {3});
  store[0].value = Tensor::vector({0.5, -1.0, 2.0});
  TrainConfig c;
  c.learning_rate = 0.1;
  Adam adam(store, c);

  std::vector<double> w{0.5, -1.0, 2.0}, m(3, 0), v(3, 0);
  const std::vector<std::vector<double>> grads{{1, -2, 0.5}, {0.3, 0.1, -4}, {-1, 0, 2}};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    Gradients g(1);
    g.slot(store[0]) = Tensor::vector(grads[t - 1]);
    adam.step(store, g);
    for (std::size_t k = 0; k < 3; ++k) {
      const double gk = grads[t - 1][k];
      m[k] = 0.9 * m[k] + 0.1 * gk;
      v[k] = 0.999 * v[k] + 0.001 * gk * gk;
      const double mh = m[k] / (1 - std::pow(0.9, double(t)));
      const double vh = v[k] / (1 - std::pow(0.999, double(t)));
      w[k] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(store[0].value[k], w[k], 1e-14) << "step " << t << " k " << k;
    }
  }
  EXPECT_EQ(adam.steps(), 3u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * sign(g) up to eps.
  ParamStore store;
  store.add("w", {2});
  TrainConfig c;
  Adam adam(store, c);
  Gradients g(1);
  g.slot(store[0]) = Tensor::vector({3.0, -0.01});
  adam.step(store, g);
  EXPECT_NEAR(store[0].value[0], -0.002, 1e-9);
  EXPECT_NEAR(store[0].value[1], 0.002, 1e-6);
}

TEST(Adam, RejectsNonFiniteGradientNamingParameter) {
  ParamStore store;
  store.add("gru.w_z", {1});
  Adam adam(store, TrainConfig{});
  Gradients g(1);
  g.slot(store[0]) = Tensor::vector({0.0});
  g.slot(store[0])[0] = std::numeric_limits<double>::infinity();
  try {
    adam.step(store, g);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("gru.w_z"), std::string::npos);
  }
}

TEST(Train, RejectsEmptySplits) {
  Dataset d = test::small_dataset(2, 2, 2);
  d.corpus.dev.clear();
  EXPECT_THROW(train(d, test::small_config()), DataError);
}

TEST(Train, BitwiseDeterministicUnderFixedSeed) {
  const Dataset d = test::small_dataset(12, 4, 4);
  const TrainResult a = train(d, test::small_config());
  const TrainResult b = train(d, test::small_config());
  EXPECT_TRUE(same_params(a.model.params(), b.model.params()));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].to_json(), b.log[i].to_json());
  }
  EXPECT_EQ(a.best_epoch, b.best_epoch);

  const TrainResult c = train(d, test::small_config(4, 8));
  EXPECT_FALSE(same_params(a.model.params(), c.model.params()));
}

TEST(Train, LogFollowsStagesAndSchedule) {
  const Dataset d = test::small_dataset(6, 3, 3);
  std::vector<EpochLog> seen;
  const TrainResult r = train(d, test::small_config(4), [&](const EpochLog& l) { seen.push_back(l); });
  ASSERT_EQ(r.log.size(), 4u);
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_EQ(r.log[0].stage, "pretrain");
  EXPECT_EQ(r.log[0].lambda, 0.0);
  for (std::size_t e = 2; e <= 4; ++e) {
    EXPECT_EQ(r.log[e - 1].stage, "main");
    EXPECT_DOUBLE_EQ(r.log[e - 1].lambda, schedule(e - 1).second);
  }
  ASSERT_TRUE(r.best_epoch.has_value());
  EXPECT_GE(*r.best_epoch, 2u);
  double best = 1e300;
  for (const auto& l : r.log) {
    if (l.stage == "main") best = std::min(best, l.dev_loss);
  }
  EXPECT_EQ(r.log[*r.best_epoch - 1].dev_loss, best);
}

TEST(Train, PretrainingLeavesRecurrentAndHeadParametersUntouched) {
  const Dataset d = test::small_dataset(10, 3, 3);
  TrainConfig c = test::small_config(2);
  c.pretrain_epochs = 2;
  const TrainResult r = train(d, c);
  ASSERT_FALSE(r.best_epoch.has_value());

  Model fresh(d.ontology, Vocabulary::build(d.corpus.train, d.ontology), c.resolved_model());
  fresh.initialize(c.seed, c.init);
  fresh.quantize_to_float();
  const ParamStore& got = r.model.params();
  const ParamStore& ref = fresh.params();
  bool any_moved = false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const std::string& n = got[i].name;
    const bool same = got[i].value.values() == ref[i].value.values();
    if (starts_with(n, "head.") || starts_with(n, "gru.") || starts_with(n, "ext.") ||
        n == "slot_keys") {
      EXPECT_TRUE(same) << n;
    } else if (starts_with(n, "attn.") || starts_with(n, "gate.")) {
      EXPECT_FALSE(same) << n;
      any_moved = true;
    }
  }
  EXPECT_TRUE(any_moved);
}

TEST(Train, SlotKeysFrozenAndPaddingRowZero) {
  const Dataset d = test::small_dataset(10, 3, 3);
  const TrainConfig c = test::small_config(3);
  const TrainResult r = train(d, c);
  Model fresh(d.ontology, Vocabulary::build(d.corpus.train, d.ontology), c.resolved_model());
  fresh.initialize(c.seed, c.init);
  fresh.quantize_to_float();
  const auto& p = r.model.params();
  EXPECT_EQ(p[r.model.slot_keys_index()].value.values(),
            fresh.params()[fresh.slot_keys_index()].value.values());
  for (double x : p[r.model.embedding_index()].value.row(Vocabulary::kPad)) EXPECT_EQ(x, 0.0);
}

TEST(Train, F32ParametersSurviveSaveLoadWithIdenticalMetrics) {
  const Dataset d = test::small_dataset(10, 3, 8);
  const TrainResult r = train(d, test::small_config(3));
  for (const auto& p : r.model.params().all()) {
    for (double x : p.value.values()) ASSERT_EQ(x, static_cast<double>(static_cast<float>(x))) << p.name;
  }
  const Model loaded = deserialize_model(serialize_model(r.model), d.ontology);
  EXPECT_TRUE(same_params(r.model.params(), loaded.params()));
  EXPECT_EQ(evaluate(r.model, d.ontology, d.corpus.test),
            evaluate(loaded, d.ontology, d.corpus.test));
}

TEST(Train, OverfitsAHandfulOfSessions) {
  const Dataset d = test::small_dataset(4, 4, 1, 5);
  TrainConfig c;
  c.epochs = 100;
  Dataset same = d;
  same.corpus.dev = d.corpus.train;
  const TrainResult r = train(same, c);
  const MetricsReport rep = evaluate(r.model, d.ontology, d.corpus.train);
  EXPECT_EQ(rep.turn.overall, 100.0) << rep.to_lines();
}
