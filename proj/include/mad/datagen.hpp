// SPDX-License-Identifier: Apache-2.0
//
// Synthetic dialogue corpora: a restaurant-booking simulator (task modes
// 1, 2 and full) and a system-driven flight-booking simulator.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mad/ontology.hpp"
#include "mad/rng.hpp"

namespace mad {

enum class Domain { kRestaurant, kFlight };
enum class TaskMode { kIssue, kUpdate, kFull };

Domain parse_domain(const std::string& text);     // "restaurant" | "flight"
TaskMode parse_task(const std::string& text);     // "1" | "2" | "full"
std::string to_string(Domain d);
std::string to_string(TaskMode t);

struct SplitSizes {
  std::size_t train = 1000;
  std::size_t dev = 1000;
  std::size_t test = 1000;
};

struct GenConfig {
  Domain domain = Domain::kRestaurant;
  TaskMode task = TaskMode::kIssue;
  SplitSizes sizes;
  std::uint64_t seed = 42;
  RestaurantConfig restaurant;
  FlightConfig flight;
};

Ontology build_ontology(const GenConfig& config);

/// Pure function of (ontology, config). Split k draws from its own stream
/// derived from the master seed, so splits are independent of each other's
/// sizes.
Corpus generate_corpus(const Ontology& ontology, const GenConfig& config);

/// One split; session ids are "<prefix>-<index>".
std::vector<Session> generate_split(const Ontology& ontology,
                                    const GenConfig& config,
                                    std::size_t split_index, std::size_t count,
                                    const std::string& prefix);

/// Surface form of a system act. `variant` picks the template (modulo the
/// pool size); slot values are rendered from the act itself.
std::string verbalize_act(const Ontology& ontology, const DialogueAct& act,
                          std::size_t variant = 0);

}  // namespace mad
