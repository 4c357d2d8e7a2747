// SPDX-License-Identifier: Apache-2.0
//
// Each memory component against a plain scalar-loop re-implementation, plus
// finite-difference gradients and the component invariants.
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mad/attention.hpp"
#include "mad/error.hpp"
#include "mad/external_memory.hpp"
#include "mad/gru.hpp"
#include "mad/heads.hpp"
#include "mad/slot_memory.hpp"
#include "support/gradcheck.hpp"

using namespace mad;

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.values()[r * t.cols() + c];
  return m;
}

Vec mv(const Mat& w, const Vec& x) {
  Vec out(w.size(), 0.0);
  for (std::size_t r = 0; r < w.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c) out[r] += w[r][c] * x[c];
  return out;
}

double dotv(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

Vec softmaxv(const Vec& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  Vec e(z.size());
  double s = 0;
  for (std::size_t k = 0; k < z.size(); ++k) s += e[k] = std::exp(z[k] - mx);
  for (double& v : e) v /= s;
  return e;
}

// Small fixture owning named parameters with random values.
struct Store {
  ParamStore ps;
  std::mt19937_64 gen{123};

  std::size_t add(const std::string& name, Shape shape, double scale = 1.0) {
    const std::size_t i = ps.add(name, std::move(shape));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : ps[i].value.values()) v = u(gen);
    return i;
  }
  const Tensor& t(std::size_t i) const { return ps[i].value; }
  Vec v(std::size_t i) const { return ps[i].value.values(); }
  Mat m(std::size_t i) const { return to_mat(ps[i].value); }
};

void expect_close(const Tensor& got, const Vec& want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], tol) << k;
}

void expect_close(const Tensor& got, const Mat& want, double tol = 1e-12) {
  Vec flat;
  for (const auto& r : want) flat.insert(flat.end(), r.begin(), r.end());
  expect_close(got, flat, tol);
}

void expect_grads(ParamStore& ps, const test::LossFn& f, double tol = 1e-6) {
  for (const auto& e : test::check_gradients(ps, f)) EXPECT_LT(e.max_abs, tol) << e.name;
}

constexpr std::size_t kM = 4, kNs = 2, kNe = 2, kIn = 6;

}  // namespace

// ---------------------------------------------------------------- GRU

struct GruFixture : ::testing::Test {
  Store s;
  std::size_t x, h, wz, uz, bz, wr, ur, br, wh, uh, bh;
  void SetUp() override {
    x = s.add("x", {kIn});
    h = s.add("h", {kM});
    wz = s.add("wz", {kM, kIn});
    uz = s.add("uz", {kM, kM});
    bz = s.add("bz", {kM});
    wr = s.add("wr", {kM, kIn});
    ur = s.add("ur", {kM, kM});
    br = s.add("br", {kM});
    wh = s.add("wh", {kM, kIn});
    uh = s.add("uh", {kM, kM});
    bh = s.add("bh", {kM});
  }
  GruWeights bind(const std::vector<Var>& v) const {
    return {v[wz], v[uz], v[bz], v[wr], v[ur], v[br], v[wh], v[uh], v[bh]};
  }
};

TEST_F(GruFixture, MatchesScalarLoop) {
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Tensor got = gru_cell(v[x], v[h], bind(v)).value();

  const Vec xv = s.v(x), hv = s.v(h);
  const Vec az = mv(s.m(wz), xv), cz = mv(s.m(uz), hv);
  const Vec ar = mv(s.m(wr), xv), cr = mv(s.m(ur), hv);
  Vec z(kM), r(kM), rh(kM), want(kM);
  for (std::size_t k = 0; k < kM; ++k) {
    z[k] = sig(az[k] + cz[k] + s.v(bz)[k]);
    r[k] = sig(ar[k] + cr[k] + s.v(br)[k]);
    rh[k] = r[k] * hv[k];
  }
  const Vec ah = mv(s.m(wh), xv), ch = mv(s.m(uh), rh);
  for (std::size_t k = 0; k < kM; ++k) {
    const double cand = std::tanh(ah[k] + ch[k] + s.v(bh)[k]);
    want[k] = (1 - z[k]) * hv[k] + z[k] * cand;
  }
  expect_close(got, want);
}

TEST_F(GruFixture, ZeroWeightsHalveTheState) {
  for (auto& p : s.ps.all()) {
    if (p.name != "h") p.value.fill(0.0);
  }
  s.ps[h].value = Tensor::vector({1, 1, 1, 1});
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  // z = sigmoid(0) = 0.5 and the candidate is tanh(0) = 0.
  expect_close(gru_cell(v[x], v[h], bind(v)).value(), Vec{0.5, 0.5, 0.5, 0.5});
}

TEST_F(GruFixture, Gradients) {
  expect_grads(s.ps, [this](Tape& t, const std::vector<Var>& v) {
    return test::project_sum(t, gru_cell(v[x], v[h], bind(v)));
  });
}

// ---------------------------------------------------------- attention

struct AttentionFixture : ::testing::Test {
  Store s;
  std::size_t keys, toks, A, B, b, vv;
  void SetUp() override {
    keys = s.add("keys", {kNs, kM});
    toks = s.add("tokens", {3, kM});
    A = s.add("A", {kM, kM});
    B = s.add("B", {kM, kM});
    b = s.add("b", {kM});
    vv = s.add("v", {kM});
  }
  AttentionWeights bind(const std::vector<Var>& v) const { return {v[A], v[B], v[b], v[vv]}; }
};

TEST_F(AttentionFixture, MatchesScalarLoop) {
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const SlotAttention got = slot_attention(v[keys], v[toks], bind(v));

  const Mat K = s.m(keys), E = s.m(toks);
  Mat alpha(kNs), ctx(kNs, Vec(kM, 0.0));
  for (std::size_t i = 0; i < kNs; ++i) {
    Vec d(E.size());
    const Vec ak = mv(s.m(A), K[i]);
    for (std::size_t j = 0; j < E.size(); ++j) {
      const Vec be = mv(s.m(B), E[j]);
      Vec hid(kM);
      for (std::size_t k = 0; k < kM; ++k) hid[k] = std::tanh(ak[k] + be[k] + s.v(b)[k]);
      d[j] = dotv(s.v(vv), hid);
    }
    alpha[i] = softmaxv(d);
    for (std::size_t j = 0; j < E.size(); ++j)
      for (std::size_t k = 0; k < kM; ++k) ctx[i][k] += alpha[i][j] * E[j][k];
  }
  expect_close(got.weights.value(), alpha);
  expect_close(got.contexts.value(), ctx);
}

TEST_F(AttentionFixture, RowsAreDistributionsForAnyLength) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0, 3);
  for (std::size_t len = 1; len <= 12; ++len) {
    Tensor tok(Shape{len, kM});
    for (auto& x : tok.values()) x = n(gen);
    Tape tape(false);
    auto v = test::bind_all(tape, s.ps);
    const Tensor a = slot_attention(v[keys], tape.constant(tok), bind(v)).weights.value();
    ASSERT_EQ(a.cols(), len);
    for (std::size_t i = 0; i < kNs; ++i) {
      double sum = 0;
      for (double w : a.row(i)) {
        EXPECT_GE(w, 0.0);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST_F(AttentionFixture, Gradients) {
  expect_grads(s.ps, [this](Tape& t, const std::vector<Var>& v) {
    const SlotAttention a = slot_attention(v[keys], v[toks], bind(v));
    return add(test::project_sum(t, a.contexts, 1), test::project_sum(t, a.weights, 2));
  });
}

// ------------------------------------------------- slot-value memory

struct GateFixture : ::testing::Test {
  Store s;
  std::size_t y, ctx, mem, wy, wc, bias;
  void SetUp() override {
    y = s.add("y", {kM});
    ctx = s.add("ctx", {kNs, kM});
    mem = s.add("mem", {kNs, kM});
    wy = s.add("wy", {kNs, kM});
    wc = s.add("wc", {kNs, kM});
    bias = s.add("bias", {kNs});
  }
  GateWeights bind(const std::vector<Var>& v) const { return {v[wy], v[wc], v[bias]}; }
};

TEST_F(GateFixture, GatesMatchScalarLoop) {
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Tensor got = update_gates(v[y], v[ctx], bind(v)).value();
  Vec want(kNs);
  for (std::size_t i = 0; i < kNs; ++i) {
    want[i] = sig(dotv(s.m(wy)[i], s.v(y)) + dotv(s.m(wc)[i], s.m(ctx)[i]) + s.v(bias)[i]);
    const Tensor single = update_gate(v[y], row(v[ctx], i), i, bind(v)).value();
    EXPECT_NEAR(single[0], want[i], 1e-12);
  }
  expect_close(got, want);
}

TEST_F(GateFixture, ReadIsRowMeanAndWriteIsConvex) {
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Mat M = s.m(mem), C = s.m(ctx);
  Vec mean(kM, 0.0);
  for (const auto& r : M)
    for (std::size_t k = 0; k < kM; ++k) mean[k] += r[k] / kNs;
  expect_close(read_value_memory(v[mem]).value(), mean);

  const Var beta = update_gates(v[y], v[ctx], bind(v));
  const Tensor written = write_value_memory(v[mem], beta, v[ctx]).value();
  Mat want(kNs, Vec(kM));
  for (std::size_t i = 0; i < kNs; ++i)
    for (std::size_t k = 0; k < kM; ++k) {
      const double b = beta.value()[i];
      want[i][k] = b * C[i][k] + (1 - b) * M[i][k];
    }
  expect_close(written, want);

  const Tensor one = write_value_memory_row(v[mem], 1, tape.constant(Tensor::vector({beta.value()[1]})),
                                                row(v[ctx], 1)).value();
  for (std::size_t k = 0; k < kM; ++k) {
    EXPECT_NEAR(one.at(0, k), M[0][k], 1e-15);
    EXPECT_NEAR(one.at(1, k), want[1][k], 1e-12);
  }
}

TEST_F(GateFixture, GatesInOpenIntervalAndWritesBetweenOldAndNew) {
  // Unit-scale inputs keep the logits where the open interval is
  // representable in double precision.
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    for (auto& p : s.ps.all())
      for (auto& x : p.value.values()) x = n(gen);
    Tape tape(false);
    auto v = test::bind_all(tape, s.ps);
    const Var beta = update_gates(v[y], v[ctx], bind(v));
    for (double b : beta.value().values()) {
      EXPECT_GT(b, 0.0);
      EXPECT_LT(b, 1.0);
    }
    const Tensor w = write_value_memory(v[mem], beta, v[ctx]).value();
    const Tensor& M = s.t(mem);
    const Tensor& C = s.t(ctx);
    for (std::size_t k = 0; k < w.size(); ++k) {
      EXPECT_GE(w[k], std::min(M[k], C[k]) - 1e-12);
      EXPECT_LE(w[k], std::max(M[k], C[k]) + 1e-12);
    }
  }
}

TEST_F(GateFixture, Gradients) {
  expect_grads(s.ps, [this](Tape& t, const std::vector<Var>& v) {
    const Var beta = update_gates(v[y], v[ctx], bind(v));
    return add(test::project_sum(t, write_value_memory(v[mem], beta, v[ctx])),
               test::project_sum(t, read_value_memory(v[mem]), 3));
  });
}

// ---------------------------------------------------- external memory

struct ExternalFixture : ::testing::Test {
  Store s;
  std::size_t mem, state, wprev, wg, vu, vs, we, wa;
  void SetUp() override {
    mem = s.add("mem", {kNe, kM});
    state = s.add("state", {kM});
    wprev = s.add("wprev", {kNe});
    s.ps[wprev].value = Tensor::vector({0.3, 0.7});
    wg = s.add("wg", {kNe, kM});
    vu = s.add("vu", {kM});
    vs = s.add("vs", {kM});
    we = s.add("we", {kM, kM});
    wa = s.add("wa", {kM, kM});
  }
  ExternalMemoryWeights bind(const std::vector<Var>& v) const {
    return {v[wg], v[vu], v[vs], v[we], v[wa]};
  }
  // Read weights by scalar loop.
  Vec oracle_weights() const {
    const Mat M = s.m(mem);
    const Vec S = s.v(state), wp = s.v(wprev);
    Vec scores(kNe);
    for (std::size_t i = 0; i < kNe; ++i) scores[i] = dotv(s.v(vu), M[i]) + dotv(s.v(vs), S);
    const Vec content = softmaxv(scores);
    const Vec g = mv(s.m(wg), S);
    Vec w(kNe);
    for (std::size_t i = 0; i < kNe; ++i) {
      const double gi = sig(g[i]);
      w[i] = gi * wp[i] + (1 - gi) * content[i];
    }
    return w;
  }
};

TEST_F(ExternalFixture, ReadMatchesScalarLoop) {
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const ExternalRead r = read_external(v[mem], v[state], v[wprev], bind(v));
  const Vec w = oracle_weights();
  const Mat M = s.m(mem);
  Vec content(kM, 0.0);
  for (std::size_t i = 0; i < kNe; ++i)
    for (std::size_t k = 0; k < kM; ++k) content[k] += w[i] * M[i][k];
  expect_close(r.weights.value(), w);
  expect_close(r.content.value(), content);
}

TEST_F(ExternalFixture, WriteMatchesScalarLoop) {
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Vec w = oracle_weights();
  const Var wv = tape.constant(Tensor::vector(w));
  const Tensor got = write_external(v[mem], v[state], wv, bind(v)).value();
  const Vec S = s.v(state);
  const Vec e = mv(s.m(we), S), a = mv(s.m(wa), S);
  const Mat M = s.m(mem);
  Mat want(kNe, Vec(kM));
  for (std::size_t i = 0; i < kNe; ++i)
    for (std::size_t k = 0; k < kM; ++k)
      want[i][k] = M[i][k] * (1 - w[i] * sig(e[k])) + w[i] * sig(a[k]);
  expect_close(got, want);
}

TEST_F(ExternalFixture, ReadWeightsAreDistributionsAndWritesBounded) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    for (auto& p : s.ps.all())
      for (auto& x : p.value.values()) x = n(gen);
    // Previous weights must themselves be a distribution.
    const double a = std::uniform_real_distribution<double>(0, 1)(gen);
    s.ps[wprev].value = Tensor::vector({a, 1 - a});
    Tape tape(false);
    auto v = test::bind_all(tape, s.ps);
    const ExternalRead r = read_external(v[mem], v[state], v[wprev], bind(v));
    // The gate is per unit, so the mixture stays in [0, 1] elementwise but
    // need not sum to one.
    for (double w : r.weights.value().values()) {
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
    const Tensor next = write_external(v[mem], v[state], r.weights, bind(v)).value();
    const Tensor& M = s.t(mem);
    for (std::size_t i = 0; i < kNe; ++i)
      for (std::size_t k = 0; k < kM; ++k) {
        // Erase shrinks toward zero, add contributes at most w(i).
        EXPECT_LE(std::abs(next.at(i, k)),
                  std::abs(M.at(i, k)) + r.weights.value()[i] + 1e-12);
      }
  }
}

TEST_F(ExternalFixture, Gradients) {
  expect_grads(s.ps, [this](Tape& t, const std::vector<Var>& v) {
    const ExternalRead r = read_external(v[mem], v[state], v[wprev], bind(v));
    Var written = write_external(v[mem], v[state], r.weights, bind(v));
    return add(test::project_sum(t, written), test::project_sum(t, r.content, 4));
  });
}

// -------------------------------------------------------------- heads

struct HeadNet {
  Store s;
  std::size_t st, ext, vm, key, h1, b1, h2, b2;
  MlpWeights bind(const std::vector<Var>& v) const { return {v[h1], v[b1], v[h2], v[b2]}; }
  void make(std::size_t in, std::size_t out) {
    st = s.add("S", {kM});
    ext = s.add("E", {kNe, kM});
    vm = s.add("V", {kNs, kM});
    key = s.add("K", {kM});
    h1 = s.add("h1", {kM, in});
    b1 = s.add("b1", {kM});
    h2 = s.add("h2", {out, kM});
    b2 = s.add("b2", {out});
  }
  Vec logits(const Vec& input) const {
    Vec hid = mv(s.m(h1), input);
    for (std::size_t k = 0; k < hid.size(); ++k) hid[k] = std::tanh(hid[k] + s.v(b1)[k]);
    Vec o = mv(s.m(h2), hid);
    for (std::size_t k = 0; k < o.size(); ++k) o[k] += s.v(b2)[k];
    return o;
  }
  static Vec cat(std::initializer_list<Vec> parts) {
    Vec out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  }
};

struct HeadFixture : ::testing::Test, HeadNet {};

TEST_F(HeadFixture, ActTypeHeadOverAllBlocks) {
  make(kM * (1 + kNe + kNs), 5);
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Tensor got = predict_da_type(v[st], v[ext], v[vm], bind(v)).value();
  expect_close(got, softmaxv(logits(cat({s.v(st), s.v(ext), s.v(vm)}))));
}

TEST_F(HeadFixture, ActTypeHeadWithoutMemories) {
  make(kM, 5);
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Tensor got = predict_da_type(v[st], Var{}, Var{}, bind(v)).value();
  expect_close(got, softmaxv(logits(s.v(st))));
}

TEST_F(HeadFixture, MaskHeadInputLayouts) {
  make(kM * (2 + kNe), 1);
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Tensor prose = predict_mask(v[st], v[ext], row(v[vm], 1), bind(v)).value();
  const Vec all = s.v(vm);
  const Vec vrow(all.begin() + kM, all.end());
  EXPECT_NEAR(prose[0], sig(logits(cat({s.v(st), s.v(ext), vrow}))[0]), 1e-12);

  HeadNet f;
  f.make(kM * kNe, 1);
  Tape t2(false);
  auto w = test::bind_all(t2, f.s.ps);
  const Tensor formula =
      predict_mask(w[f.st], w[f.ext], row(w[f.vm], 0), f.bind(w), MaskHeadInputs::kFormula)
          .value();
  EXPECT_NEAR(formula[0], sig(f.logits(f.s.v(f.ext))[0]), 1e-12);
}

TEST_F(HeadFixture, ValueHeadOnKeyAndValueRow) {
  make(2 * kM, 7);
  Tape tape(false);
  auto v = test::bind_all(tape, s.ps);
  const Tensor got = predict_slot_value(v[key], row(v[vm], 0), bind(v)).value();
  const Vec all = s.v(vm);
  const Vec vrow(all.begin(), all.begin() + kM);
  expect_close(got, softmaxv(logits(cat({s.v(key), vrow}))));
}

TEST_F(HeadFixture, Gradients) {
  make(kM * (1 + kNe + kNs), 5);
  expect_grads(s.ps, [this](Tape&, const std::vector<Var>& v) {
    return cross_entropy(predict_da_type(v[st], v[ext], v[vm], bind(v)), 3);
  });
}

TEST(Heads, ArgmaxPrefersLowestIndexOnTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{1.0}), 0u);
  EXPECT_THROW(argmax(std::vector<double>{}), ShapeError);
}

TEST(Heads, AssembleActThresholdIsStrict) {
  HeadOutputs h;
  h.act_type = Tensor::vector({0.1, 0.9});
  h.mask = Tensor::vector({0.5, 0.51});
  h.values = {Tensor::vector({0.6, 0.4}), Tensor::vector({0.3, 0.7})};
  const DialogueAct act = assemble_act(h);
  EXPECT_EQ(act.type, 1u);
  EXPECT_EQ(act.mask, (std::vector<int>{0, 1}));
  EXPECT_FALSE(act.values[0].has_value());
  EXPECT_EQ(act.values[1], 1u);
}
