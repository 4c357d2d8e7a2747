// SPDX-License-Identifier: Apache-2.0
#include "mad/ontology.hpp"

#include <cstdint>
#include <cstdio>
#include <set>

#include "mad/error.hpp"

namespace mad {

namespace {

const std::vector<std::string> kCuisines = {
    "british", "cantonese", "french",  "indian",  "italian",
    "japanese", "korean",   "spanish", "thai",    "vietnamese"};
const std::vector<std::string> kLocations = {
    "bangkok", "beijing", "bombay", "hanoi", "london",
    "madrid",  "paris",   "rome",   "seoul", "tokyo"};
const std::vector<std::string> kPrices = {"cheap", "moderate", "expensive"};
const std::vector<std::string> kSizes = {"two", "four", "six", "eight"};

const std::vector<std::string> kCities = {
    "beijing",   "shanghai",  "guangzhou", "shenzhen",     "chengdu",
    "hangzhou",  "wuhan",     "xian",      "chongqing",    "nanjing",
    "tianjin",   "suzhou",    "changsha",  "zhengzhou",    "kunming",
    "dalian",    "qingdao",   "xiamen",    "shenyang",     "harbin",
    "jinan",     "fuzhou",    "hefei",     "nanning",      "guiyang",
    "lanzhou",   "taiyuan",   "shijiazhuang", "urumqi",    "hohhot",
    "lhasa",     "haikou",    "sanya",     "ningbo",       "wuxi",
    "changchun", "nanchang",  "yinchuan",  "xining",       "zhuhai",
    "guilin",    "lijiang",   "dunhuang",  "yantai",       "weihai",
    "wenzhou",   "quanzhou",  "shantou",   "zhanjiang",    "luoyang",
    "datong",    "baotou",    "yichang",   "xiangyang",    "mianyang",
    "yibin",     "zunyi",     "liuzhou",   "beihai",       "jiayuguan"};

std::vector<std::string> take_values(const std::vector<std::string>& base,
                                     std::size_t count,
                                     const std::string& stem) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(i < base.size() ? base[i] : stem + std::to_string(i + 1));
  }
  return out;
}

std::vector<std::string> make_dates(std::size_t count) {
  static constexpr int kMonthDays[12] = {31, 28, 31, 30, 31, 30,
                                         31, 31, 30, 31, 30, 31};
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    int day = static_cast<int>(k * 365 / count);
    int month = 0;
    while (day >= kMonthDays[month]) {
      day -= kMonthDays[month];
      ++month;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d.%02d", month + 1, day + 1);
    out.emplace_back(buf);
  }
  return out;
}

void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

std::optional<std::size_t> Ontology::find_slot(const std::string& name) const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Ontology::find_act(const std::string& name) const {
  for (std::size_t i = 0; i < act_types.size(); ++i) {
    if (act_types[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Ontology::find_value(std::size_t slot,
                                                const std::string& value) const {
  const auto& vals = slots.at(slot).values;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] == value) return i;
  }
  return std::nullopt;
}

std::size_t Ontology::slot_index(const std::string& name) const {
  auto i = find_slot(name);
  if (!i) throw DataError("unknown slot '" + name + "'");
  return *i;
}

std::size_t Ontology::act_index(const std::string& name) const {
  auto i = find_act(name);
  if (!i) throw DataError("unknown dialogue act type '" + name + "'");
  return *i;
}

std::string Ontology::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s, char sep) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= static_cast<unsigned char>(sep);
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : slots) {
    feed(s.name, '\x1d');
    for (const auto& v : s.values) feed(v, '\x1e');
    feed("", '\x1f');
  }
  for (const auto& a : act_types) feed(a, '\x1c');
  feed(ask_slot ? slots.at(*ask_slot).name : std::string("-"), '\x1b');
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Ontology::validate() const {
  if (slots.empty()) throw ConfigError("ontology has no slots");
  if (act_types.empty()) throw ConfigError("ontology has no act types");
  std::set<std::string> names;
  for (const auto& s : slots) {
    if (!names.insert(s.name).second) {
      throw ConfigError("duplicate slot name '" + s.name + "'");
    }
    if (s.values.empty()) {
      throw ConfigError("slot '" + s.name + "' has an empty value list");
    }
  }
  std::set<std::string> acts(act_types.begin(), act_types.end());
  if (acts.size() != act_types.size()) {
    throw ConfigError("duplicate dialogue act type");
  }
  if (ask_slot && *ask_slot >= slots.size()) {
    throw ConfigError("ask slot index out of range");
  }
}

Ontology build_restaurant_ontology(const RestaurantConfig& config) {
  require_positive(config.cuisines, "cuisine count");
  require_positive(config.locations, "location count");
  require_positive(config.prices, "price count");
  require_positive(config.sizes, "size count");
  if (config.requestables.empty()) {
    throw ConfigError("at least one requestable slot is required");
  }
  Ontology o;
  o.slots = {
      {restaurant::kCuisine, take_values(kCuisines, config.cuisines, "cuisine")},
      {restaurant::kLocation, take_values(kLocations, config.locations, "place")},
      {restaurant::kPrice, take_values(kPrices, config.prices, "pricelevel")},
      {restaurant::kSize, take_values(kSizes, config.sizes, "party")},
      {restaurant::kAskSlot, config.requestables},
  };
  o.ask_slot = 4;
  o.act_types = {"ask_cuisine", "ask_location", "ask_price",     "ask_size",
                 "api_call",    "update_api_call", "acknowledge", "display_options",
                 "give_info",   "end"};
  o.validate();
  return o;
}

Ontology build_flight_ontology(const FlightConfig& config) {
  if (config.cities < 2) throw ConfigError("city count must be at least 2");
  require_positive(config.dates, "date count");
  if (config.dates > 365) throw ConfigError("date count must be at most 365");
  Ontology o;
  const auto cities = take_values(kCities, config.cities, "city");
  o.slots = {
      {flight::kDepCity, cities},
      {flight::kArrCity, cities},
      {flight::kDate, make_dates(config.dates)},
  };
  o.act_types = {"ask_dep_loc", "ask_arr_loc", "ask_dep_date", "offer", "end"};
  o.validate();
  return o;
}

bool is_flight_ontology(const Ontology& ontology) {
  return ontology.find_slot(flight::kDepCity) &&
         ontology.find_slot(flight::kArrCity);
}

DialogueAct DialogueAct::empty(const Ontology& ontology, std::size_t type) {
  DialogueAct a;
  a.type = type;
  a.mask.assign(ontology.slot_count(), 0);
  a.values.assign(ontology.slot_count(), std::nullopt);
  return a;
}

void DialogueAct::set(std::size_t slot, std::size_t value) {
  mask.at(slot) = 1;
  values.at(slot) = value;
}

void validate_act(const DialogueAct& act, const Ontology& ontology) {
  if (act.type >= ontology.act_count()) {
    throw DataError("act type index " + std::to_string(act.type) +
                    " out of range");
  }
  if (act.mask.size() != ontology.slot_count() ||
      act.values.size() != ontology.slot_count()) {
    throw DataError("act mask/values length does not match slot count");
  }
  for (std::size_t i = 0; i < act.mask.size(); ++i) {
    if (act.mask[i] != 0 && act.mask[i] != 1) {
      throw DataError("mask entry for slot '" + ontology.slots[i].name +
                      "' is not binary");
    }
    if (act.mask[i] == 1 && !act.values[i]) {
      throw DataError("masked slot '" + ontology.slots[i].name +
                      "' has no value");
    }
    if (act.values[i] && *act.values[i] >= ontology.slots[i].values.size()) {
      throw DataError("value index out of range for slot '" +
                      ontology.slots[i].name + "'");
    }
  }
}

}  // namespace mad
