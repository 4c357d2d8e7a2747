// SPDX-License-Identifier: Apache-2.0
#include "mad/evaluation.hpp"

#include <cstdio>

#include "json.hpp"

#include "mad/error.hpp"

namespace mad {

namespace {

double percent(std::size_t correct, std::size_t total) {
  return total == 0 ? 100.0
                    : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

TurnPrediction prediction_from_heads(const HeadOutputs& heads) {
  TurnPrediction p;
  p.act_type = argmax(heads.act_type.span());
  p.mask.reserve(heads.mask.size());
  for (double prob : heads.mask.values()) p.mask.push_back(prob > 0.5 ? 1 : 0);
  for (const auto& v : heads.values) p.values.push_back(argmax(v.span()));
  return p;
}

MetricsReport score(const Ontology& ontology,
                    const std::vector<SessionPredictions>& sessions) {
  const std::size_t ns = ontology.slot_count();
  MetricsReport r;
  std::size_t turn_ok[4] = {}, session_ok[4] = {};
  std::vector<std::size_t> slot_correct(ns, 0), slot_total(ns, 0);

  for (const auto& s : sessions) {
    if (s.turns.size() != s.gold.size()) {
      throw DataError("prediction and gold turn counts differ");
    }
    bool all[4] = {true, true, true, true};
    for (std::size_t t = 0; t < s.turns.size(); ++t) {
      const TurnPrediction& p = s.turns[t];
      const DialogueAct& g = s.gold[t];
      const bool type_ok = p.act_type == g.type;
      const bool mask_ok = p.mask == g.mask;
      bool value_ok = true;
      for (std::size_t i = 0; i < ns; ++i) {
        if (g.mask[i] != 1) continue;
        const bool hit = p.values.at(i) == *g.values[i];
        ++slot_total[i];
        if (hit) ++slot_correct[i];
        value_ok = value_ok && hit;
      }
      const bool ok[4] = {type_ok, value_ok, mask_ok, type_ok && value_ok && mask_ok};
      for (int c = 0; c < 4; ++c) {
        turn_ok[c] += ok[c] ? 1 : 0;
        all[c] = all[c] && ok[c];
      }
      ++r.turns;
    }
    for (int c = 0; c < 4; ++c) session_ok[c] += all[c] ? 1 : 0;
    ++r.sessions;
  }
  r.empty = r.turns == 0;
  r.turn = {percent(turn_ok[0], r.turns), percent(turn_ok[1], r.turns),
            percent(turn_ok[2], r.turns), percent(turn_ok[3], r.turns)};
  r.session = {percent(session_ok[0], r.sessions), percent(session_ok[1], r.sessions),
               percent(session_ok[2], r.sessions), percent(session_ok[3], r.sessions)};
  for (std::size_t i = 0; i < ns; ++i) {
    r.per_slot.push_back({ontology.slots[i].name, slot_correct[i], slot_total[i],
                          percent(slot_correct[i], slot_total[i])});
  }
  return r;
}

std::vector<SessionPredictions> predict(const Model& model,
                                        const std::vector<Session>& split) {
  std::vector<SessionPredictions> out;
  out.reserve(split.size());
  for (const auto& s : split) {
    SessionPredictions sp;
    DialogueMemoryState state = model.initial_state();
    for (const auto& turn : s.turns) {
      TurnTrace trace;
      state = model.step(state, turn.user, turn.system_prev, &trace);
      sp.turns.push_back(prediction_from_heads(trace.heads));
      sp.gold.push_back(turn.act);
    }
    out.push_back(std::move(sp));
  }
  return out;
}

MetricsReport evaluate(const Model& model, const Ontology& ontology,
                       const std::vector<Session>& split) {
  if (model.ontology().hash() != ontology.hash()) {
    throw HashMismatchError("model ontology " + model.ontology().hash() +
                            " does not match corpus ontology " + ontology.hash());
  }
  MetricsReport r = score(ontology, predict(model, split));
  r.info["variant"] = model.config().variant_name();
  return r;
}

CityProbe city_disambiguation_probe(const Ontology& ontology,
                                    const std::vector<SessionPredictions>& predictions) {
  if (!is_flight_ontology(ontology)) {
    throw ConfigError("city disambiguation probe needs the flight ontology");
  }
  const MetricsReport r = score(ontology, predictions);
  CityProbe probe;
  probe.departure = r.per_slot[ontology.slot_index(flight::kDepCity)];
  probe.arrival = r.per_slot[ontology.slot_index(flight::kArrCity)];
  return probe;
}

CityProbe city_disambiguation_probe(const Model& model,
                                    const std::vector<Session>& split) {
  if (!is_flight_ontology(model.ontology())) {
    throw ConfigError("city disambiguation probe needs the flight ontology");
  }
  return city_disambiguation_probe(model.ontology(), predict(model, split));
}

std::string MetricsReport::to_json() const {
  using json = nlohmann::ordered_json;
  auto comp = [](const ComponentAccuracy& c) {
    return json{{"da_type", c.da_type},
                {"slot_value", c.slot_value},
                {"mask", c.mask},
                {"overall", c.overall}};
  };
  json slots = json::array();
  for (const auto& s : per_slot) {
    slots.push_back(json{{"slot", s.slot},
                         {"correct", s.correct},
                         {"total", s.total},
                         {"accuracy", s.accuracy}});
  }
  json j{{"turns", turns},     {"sessions", sessions},
         {"empty", empty},     {"turn_level", comp(turn)},
         {"session_level", comp(session)}, {"per_slot", slots}};
  json meta = json::object();
  for (const auto& [k, v] : info) meta[k] = v;
  j["info"] = meta;
  return j.dump(2) + "\n";
}

std::string MetricsReport::to_lines() const {
  std::map<std::string, std::string> kv;
  kv["counts.turns"] = std::to_string(turns);
  kv["counts.sessions"] = std::to_string(sessions);
  kv["empty"] = empty ? "1" : "0";
  const std::pair<const char*, const ComponentAccuracy*> levels[] = {
      {"turn", &turn}, {"session", &session}};
  for (const auto& [name, c] : levels) {
    const std::string p = name;
    kv[p + ".da_type"] = fmt(c->da_type);
    kv[p + ".slot_value"] = fmt(c->slot_value);
    kv[p + ".mask"] = fmt(c->mask);
    kv[p + ".overall"] = fmt(c->overall);
  }
  for (const auto& s : per_slot) {
    kv["slot." + s.slot + ".accuracy"] = fmt(s.accuracy);
    kv["slot." + s.slot + ".total"] = std::to_string(s.total);
  }
  for (const auto& [k, v] : info) kv["info." + k] = v;
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

}  // namespace mad
