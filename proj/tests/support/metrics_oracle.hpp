// SPDX-License-Identifier: Apache-2.0
//
// Independent recount of the accuracy report. Flattens every turn into a
// record first, then counts each component in its own pass.
#pragma once

#include <algorithm>
#include <vector>

#include "mad/evaluation.hpp"

namespace mad::test {

inline MetricsReport metrics_oracle(const Ontology& o,
                                    const std::vector<SessionPredictions>& sessions) {
  struct Record {
    std::size_t session;
    bool type, value, mask;
  };
  std::vector<Record> records;
  const std::size_t ns = o.slot_count();
  std::vector<std::size_t> hit(ns), seen(ns);
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    for (std::size_t t = 0; t < sessions[s].turns.size(); ++t) {
      const auto& p = sessions[s].turns[t];
      const auto& g = sessions[s].gold[t];
      Record r{s, p.act_type == g.type, true, true};
      for (std::size_t i = 0; i < ns; ++i) {
        if (p.mask[i] != g.mask[i]) r.mask = false;
      }
      for (std::size_t i = 0; i < ns; ++i) {
        if (!g.mask[i]) continue;
        ++seen[i];
        if (p.values[i] == g.values[i].value()) {
          ++hit[i];
        } else {
          r.value = false;
        }
      }
      records.push_back(r);
    }
  }
  auto pct = [](std::size_t a, std::size_t b) {
    return b ? 100.0 * static_cast<double>(a) / static_cast<double>(b) : 100.0;
  };
  auto turn_level = [&](auto pred) {
    return pct(std::count_if(records.begin(), records.end(), pred), records.size());
  };
  auto session_level = [&](auto pred) {
    std::size_t ok = 0;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      bool all = true;
      for (const auto& r : records) {
        if (r.session == s && !pred(r)) all = false;
      }
      ok += all;
    }
    return pct(ok, sessions.size());
  };
  auto type = [](const Record& r) { return r.type; };
  auto value = [](const Record& r) { return r.value; };
  auto mask = [](const Record& r) { return r.mask; };
  auto overall = [](const Record& r) { return r.type && r.value && r.mask; };

  MetricsReport out;
  out.turns = records.size();
  out.sessions = sessions.size();
  out.empty = records.empty();
  out.turn = {turn_level(type), turn_level(value), turn_level(mask), turn_level(overall)};
  out.session = {session_level(type), session_level(value), session_level(mask),
                 session_level(overall)};
  for (std::size_t i = 0; i < ns; ++i) {
    out.per_slot.push_back({o.slots[i].name, hit[i], seen[i], pct(hit[i], seen[i])});
  }
  return out;
}

/// Gold acts and predictions that agree on each component with the given
/// probability, so every accuracy lands strictly between 0 and 100 on
/// average.
inline std::vector<SessionPredictions> random_predictions(const Ontology& o, Rng& rng,
                                                          std::size_t sessions,
                                                          double agree = 0.7) {
  std::vector<SessionPredictions> out(sessions);
  const std::size_t ns = o.slot_count();
  for (auto& s : out) {
    const std::size_t turns = rng.below(7);  // zero-turn sessions included
    for (std::size_t t = 0; t < turns; ++t) {
      DialogueAct g = DialogueAct::empty(o, rng.below(o.act_count()));
      for (std::size_t i = 0; i < ns; ++i) {
        if (rng.chance(0.4)) g.set(i, rng.below(o.slots[i].values.size()));
      }
      TurnPrediction p;
      p.act_type = rng.chance(agree) ? g.type : rng.below(o.act_count());
      for (std::size_t i = 0; i < ns; ++i) {
        p.mask.push_back(rng.chance(agree) ? g.mask[i] : 1 - g.mask[i]);
        const std::size_t nv = o.slots[i].values.size();
        p.values.push_back(g.values[i] && rng.chance(agree) ? *g.values[i] : rng.below(nv));
      }
      s.turns.push_back(p);
      s.gold.push_back(g);
    }
  }
  return out;
}

}  // namespace mad::test
