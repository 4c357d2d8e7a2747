// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace mad {

struct Slot {
  std::string name;
  std::vector<std::string> values;

  friend bool operator==(const Slot&, const Slot&) = default;
};

/// Slots with their value lists, dialogue-act types and the optional
/// synthetic Ask Slot whose values are the requestable slot names.
struct Ontology {
  std::vector<Slot> slots;
  std::vector<std::string> act_types;
  std::optional<std::size_t> ask_slot;

  std::size_t slot_count() const { return slots.size(); }
  std::size_t act_count() const { return act_types.size(); }

  std::optional<std::size_t> find_slot(const std::string& name) const;
  std::optional<std::size_t> find_act(const std::string& name) const;
  std::optional<std::size_t> find_value(std::size_t slot,
                                        const std::string& value) const;
  std::size_t slot_index(const std::string& name) const;  // throws
  std::size_t act_index(const std::string& name) const;   // throws

  /// 16 hex digits, FNV-1a over a canonical encoding of the content.
  std::string hash() const;

  /// Throws ConfigError on duplicate slot names or empty value lists.
  void validate() const;

  friend bool operator==(const Ontology&, const Ontology&) = default;
};

struct RestaurantConfig {
  std::size_t cuisines = 10;
  std::size_t locations = 10;
  std::size_t prices = 3;
  std::size_t sizes = 4;
  std::vector<std::string> requestables{"address", "telephone"};
};

struct FlightConfig {
  std::size_t cities = 174;
  std::size_t dates = 100;
};

namespace restaurant {
inline constexpr const char* kCuisine = "Cuisine";
inline constexpr const char* kLocation = "Location";
inline constexpr const char* kPrice = "Price";
inline constexpr const char* kSize = "Size";
inline constexpr const char* kAskSlot = "Ask_Slot";
}  // namespace restaurant

namespace flight {
inline constexpr const char* kDepCity = "Dep_city";
inline constexpr const char* kArrCity = "Arr_city";
inline constexpr const char* kDate = "Date";
}  // namespace flight

/// Four domain slots plus the Ask Slot; ten act types.
Ontology build_restaurant_ontology(const RestaurantConfig& config = {});

/// Dep_city / Arr_city share one city list; Date values are MM.DD.
Ontology build_flight_ontology(const FlightConfig& config = {});

bool is_flight_ontology(const Ontology& ontology);

/// A system dialogue act: type, binary slot mask and per-slot values.
struct DialogueAct {
  std::size_t type = 0;
  std::vector<int> mask;
  std::vector<std::optional<std::size_t>> values;

  static DialogueAct empty(const Ontology& ontology, std::size_t type);
  void set(std::size_t slot, std::size_t value);

  friend bool operator==(const DialogueAct&, const DialogueAct&) = default;
};

/// Throws DataError if the act is inconsistent with the ontology.
void validate_act(const DialogueAct& act, const Ontology& ontology);

struct Turn {
  std::string user;
  std::string system_prev;
  DialogueAct act;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Session {
  std::string id;
  std::vector<Turn> turns;

  friend bool operator==(const Session&, const Session&) = default;
};

struct Corpus {
  std::vector<Session> train, dev, test;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

}  // namespace mad
