// SPDX-License-Identifier: Apache-2.0
#include "mad/sweep.hpp"

#include <cstdio>

#include "json.hpp"

#include "mad/error.hpp"

namespace mad {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Values in column order; the header is built from the same list.
std::vector<std::pair<std::string, std::string>> cells(const SweepRow& row) {
  const MetricsReport& r = row.report;
  std::vector<std::pair<std::string, std::string>> out = {
      {"key", row.key},
      {"value", row.value},
      {"seed", std::to_string(row.seed)},
      {"best_epoch", std::to_string(row.best_epoch)},
      {"turns", std::to_string(r.turns)},
      {"sessions", std::to_string(r.sessions)},
  };
  const std::pair<const char*, const ComponentAccuracy*> levels[] = {
      {"turn", &r.turn}, {"session", &r.session}};
  for (const auto& [name, c] : levels) {
    const std::string p = name;
    out.emplace_back(p + "_da_type", fmt(c->da_type));
    out.emplace_back(p + "_slot_value", fmt(c->slot_value));
    out.emplace_back(p + "_mask", fmt(c->mask));
    out.emplace_back(p + "_overall", fmt(c->overall));
  }
  for (const auto& s : r.per_slot) out.emplace_back("slot_" + s.slot, fmt(s.accuracy));
  return out;
}

}  // namespace

std::vector<std::string> sweep_columns(const Ontology& ontology) {
  SweepRow blank;
  for (const auto& s : ontology.slots) blank.report.per_slot.push_back({s.name});
  std::vector<std::string> names;
  for (const auto& [k, v] : cells(blank)) names.push_back(k);
  return names;
}

std::string sweep_csv_header(const Ontology& ontology) {
  std::string out;
  for (const auto& name : sweep_columns(ontology)) {
    if (!out.empty()) out += ',';
    out += name;
  }
  return out + "\n";
}

std::string sweep_csv_row(const SweepRow& row) {
  std::string out;
  for (const auto& [k, v] : cells(row)) {
    if (!out.empty()) out += ',';
    out += v;
  }
  return out + "\n";
}

std::string sweep_jsonl_row(const SweepRow& row) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : cells(row)) {
    if (k == "key" || k == "value") {
      j[k] = v;
    } else if (k == "seed" || k == "best_epoch" || k == "turns" || k == "sessions") {
      j[k] = std::stoull(v);
    } else {
      j[k] = std::stod(v);
    }
  }
  return j.dump() + "\n";
}

std::vector<SweepRow> run_sweep(const Dataset& data, const TrainConfig& base,
                                const std::string& key,
                                const std::vector<std::string>& values,
                                const std::function<void(const SweepRow&)>& on_row) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    TrainConfig config = base;
    set_config_value(config, key, value);
    config.validate();
    TrainResult result = train(data, config);
    SweepRow row;
    row.key = key;
    row.value = value;
    row.seed = config.seed;
    row.best_epoch = result.best_epoch.value_or(0);
    row.report = evaluate(result.model, data.ontology, data.corpus.test);
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mad
