// SPDX-License-Identifier: Apache-2.0
//
// Hyperparameter sweep: trains one model per value of a config key and
// tabulates fine-grained test accuracies.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mad/evaluation.hpp"
#include "mad/training.hpp"

namespace mad {

struct SweepRow {
  std::string key;
  std::string value;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;  // 0 when no main epoch ran
  MetricsReport report;
};

/// Column names of the CSV form, in order.
std::vector<std::string> sweep_columns(const Ontology& ontology);
std::string sweep_csv_header(const Ontology& ontology);
std::string sweep_csv_row(const SweepRow& row);
/// One JSON object per line, keys as in the CSV header.
std::string sweep_jsonl_row(const SweepRow& row);

/// Trains `base` with `key` set to each of `values` in turn (via
/// set_config_value) and evaluates on the test split. `on_row` sees each
/// row as soon as it is ready.
std::vector<SweepRow> run_sweep(const Dataset& data, const TrainConfig& base,
                                const std::string& key,
                                const std::vector<std::string>& values,
                                const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace mad
