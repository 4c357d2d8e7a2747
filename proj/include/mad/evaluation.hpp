// SPDX-License-Identifier: Apache-2.0
//
// Turn- and session-level accuracy of predicted dialogue acts.
//
// A turn's act type is correct on exact match, its mask when the whole binary
// vector matches, and its slot values when the value-head argmax equals the
// gold value for every slot the GOLD act masks (vacuously true when the gold
// mask is empty). A turn is overall-correct when all three hold; a session is
// correct for a component when every one of its turns is.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mad/heads.hpp"
#include "mad/model.hpp"
#include "mad/ontology.hpp"

namespace mad {

/// What a model committed to on one turn.
struct TurnPrediction {
  std::size_t act_type = 0;
  std::vector<int> mask;             // thresholded at 0.5
  std::vector<std::size_t> values;   // argmax for every slot

  friend bool operator==(const TurnPrediction&, const TurnPrediction&) = default;
};

TurnPrediction prediction_from_heads(const HeadOutputs& heads);

struct SessionPredictions {
  std::vector<TurnPrediction> turns;
  std::vector<DialogueAct> gold;
};

struct ComponentAccuracy {
  double da_type = 100.0;
  double slot_value = 100.0;
  double mask = 100.0;
  double overall = 100.0;

  friend bool operator==(const ComponentAccuracy&, const ComponentAccuracy&) = default;
};

struct SlotAccuracy {
  std::string slot;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 100.0;  // percent; 100 when total is 0

  friend bool operator==(const SlotAccuracy&, const SlotAccuracy&) = default;
};

struct MetricsReport {
  std::size_t turns = 0;
  std::size_t sessions = 0;
  bool empty = true;
  ComponentAccuracy turn;
  ComponentAccuracy session;
  std::vector<SlotAccuracy> per_slot;
  /// Free-form provenance (variant, seed, split, model path, ...).
  std::map<std::string, std::string> info;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;

  /// Pretty JSON document.
  std::string to_json() const;
  /// One "name=value" line per metric, sorted by name.
  std::string to_lines() const;
};

/// Scores predictions against gold acts; accuracies are percentages.
MetricsReport score(const Ontology& ontology,
                    const std::vector<SessionPredictions>& sessions);

/// Runs the model over every session of `split` (resetting the state per
/// session and feeding the gold previous system utterance) and scores it.
/// Throws HashMismatchError when the model was built for another ontology.
MetricsReport evaluate(const Model& model, const Ontology& ontology,
                       const std::vector<Session>& split);

/// Predictions the model makes on `split`, one entry per session.
std::vector<SessionPredictions> predict(const Model& model,
                                        const std::vector<Session>& split);

struct CityProbe {
  SlotAccuracy departure;
  SlotAccuracy arrival;
};

/// Value accuracy for Dep_city and Arr_city over the turns whose gold act
/// masks the respective slot. Throws ConfigError for non-flight ontologies.
CityProbe city_disambiguation_probe(const Ontology& ontology,
                                    const std::vector<SessionPredictions>& predictions);
CityProbe city_disambiguation_probe(const Model& model,
                                    const std::vector<Session>& split);

}  // namespace mad
