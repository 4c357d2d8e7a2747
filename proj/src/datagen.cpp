// SPDX-License-Identifier: Apache-2.0
#include "mad/datagen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>

#include "mad/error.hpp"

namespace mad {

namespace {

using Pool = std::vector<std::string>;

// Replaces every "{key}" by its binding.
std::string fill(const std::string& tmpl,
                 const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size() + 16);
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      const auto it = vars.find(tmpl.substr(i + 1, close - i - 1));
      if (close != std::string::npos && it != vars.end()) {
        out += it->second;
        i = close + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

// ---- restaurant system side ----

const std::map<std::string, Pool>& restaurant_system() {
  static const std::map<std::string, Pool> pools = {
      {"ask_cuisine",
       {"any preference on a type of cuisine", "what kind of food would you like",
        "which cuisine do you have in mind", "what type of food are you looking for",
        "do you have a cuisine in mind"}},
      {"ask_location",
       {"where should it be", "which area are you looking at",
        "in which city would you like to eat", "where would you like the restaurant",
        "do you have a location in mind"}},
      {"ask_price",
       {"which price range are you looking for", "what is your budget",
        "what price range do you prefer", "any price preference",
        "do you have a budget in mind"}},
      {"ask_size",
       {"how many people would be in your party", "for how many people",
        "how many guests", "what is the party size",
        "how many of you will there be"}},
      {"api_call",
       {"api_call {Cuisine} {Location} {Size} {Price}",
        "querying api_call {Cuisine} {Location} {Size} {Price}",
        "running api_call {Cuisine} {Location} {Size} {Price}",
        "sending api_call {Cuisine} {Location} {Size} {Price}",
        "issuing api_call {Cuisine} {Location} {Size} {Price}"}},
      {"update_api_call",
       {"update_api_call {Cuisine} {Location} {Size} {Price}",
        "querying update_api_call {Cuisine} {Location} {Size} {Price}",
        "running update_api_call {Cuisine} {Location} {Size} {Price}",
        "sending update_api_call {Cuisine} {Location} {Size} {Price}",
        "issuing update_api_call {Cuisine} {Location} {Size} {Price}"}},
      // Five sub-pools of five: greet, on it, lookup, anything else, reserve.
      {"acknowledge",
       {"hello what can i help you with today", "hi how can i help",
        "hello how may i assist you", "good day what can i do for you",
        "hi there what can i help you with",
        "i'm on it", "ok i'm working on it", "sure let me handle that",
        "got it i'm on it", "alright i'm on it",
        "ok let me look into some options for you", "let me check what is available",
        "one moment while i search", "i will look that up for you",
        "searching for options now",
        "sure is there anything else to update", "ok anything else to change",
        "done is there anything else", "noted anything else you want to modify",
        "alright is there something else to update",
        "great let me do the reservation", "perfect i will book it now",
        "wonderful i am making the booking", "excellent reserving it for you",
        "good choice booking it now"}},
      {"display_options",
       {"what do you think of this option", "how about this place",
        "this one has good reviews what do you think",
        "i found a nice place would you like it",
        "here is another suggestion do you like it"}},
      {"give_info",
       {"here is the {Ask_Slot}", "the {Ask_Slot} is on its way",
        "sure here is the {Ask_Slot}", "i am sending you the {Ask_Slot}",
        "you can find the {Ask_Slot} here"}},
      {"end",
       {"you're welcome", "happy to help goodbye", "enjoy your meal",
        "my pleasure have a nice day", "glad i could help"}},
  };
  return pools;
}

enum class Ack { kGreet = 0, kOnIt = 1, kLookup = 2, kAnythingElse = 3, kReserve = 4 };

// ---- flight system side ----

const std::map<std::string, Pool>& flight_system() {
  static const std::map<std::string, Pool> pools = {
      {"ask_dep_loc",
       {"where are you flying from", "which city are you departing from",
        "what is your departure city", "where will you leave from",
        "what is your origin"}},
      {"ask_arr_loc",
       {"where are you flying to", "which city are you going to",
        "what is your arrival city", "where will you land",
        "what is your destination"}},
      {"ask_dep_date",
       {"when do you want to leave", "what day will you travel",
        "which date do you prefer", "when is your departure",
        "on what date will you fly"}},
      {"offer",
       {"i found a flight from {Dep_city} to {Arr_city} on {Date}",
        "there is a flight {Dep_city} to {Arr_city} on {Date}",
        "how about this flight from {Dep_city} to {Arr_city} on {Date}",
        "flight available {Dep_city} to {Arr_city} {Date}",
        "i can offer {Dep_city} to {Arr_city} on {Date}"}},
      {"end",
       {"goodbye", "have a nice trip", "your ticket is booked goodbye",
        "enjoy your flight", "thanks for booking with us"}},
  };
  return pools;
}

// ---- user side ----

const Pool kGreet = {"hello", "hi", "good morning", "hey there", "hi there"};
const Pool kRequestBase = {"i'd like to book a table", "may i have a table",
                           "can you book a table", "i want to reserve a table",
                           "could you find me a restaurant"};
const std::array<Pool, 4> kRequestFragment = {
    Pool{"with {v} food", "serving {v} cuisine"},
    Pool{"in {v}", "located in {v}"},
    Pool{"in a {v} price range", "that is {v}"},
    Pool{"for {v} people", "for {v}"}};
const std::array<Pool, 4> kAnswer = {
    Pool{"{v}", "{v} food", "i love {v} food", "with {v} food", "i'd like {v} please"},
    Pool{"{v}", "in {v}", "{v} please", "somewhere in {v}", "i'd prefer {v}"},
    Pool{"{v}", "{v} please", "a {v} one", "in a {v} price range please", "i prefer {v}"},
    Pool{"{v}", "for {v} please", "we will be {v}", "{v} people", "for {v} people please"}};
const std::array<Pool, 4> kUpdate = {
    Pool{"actually i would prefer {v} food", "instead could it be with {v} food",
         "can you change the cuisine to {v}", "let's go for {v} food instead",
         "i changed my mind i want {v} food"},
    Pool{"actually i would prefer {v}", "instead could it be in {v}",
         "can you make it in {v}", "let's do {v} instead",
         "i changed my mind i want it in {v}"},
    Pool{"actually i would prefer a {v} price range", "instead could it be {v}",
         "can you make it {v}", "let's go for a {v} place instead",
         "i changed my mind i want something {v}"},
    Pool{"actually we will be {v}", "instead could it be for {v}",
         "can you make it for {v} people", "we are now {v} people",
         "i changed my mind book it for {v}"}};
const Pool kSilence = {"<silence>"};
const Pool kNo = {"no", "no thanks", "nothing else", "no that's it", "no i'm good"};
const Pool kReject = {"no i don't like that", "do you have something else",
                      "no this does not work for me", "show me another one",
                      "i'd rather see another option"};
const Pool kAccept = {"let's do it", "that looks great", "i love that",
                      "it's perfect", "sounds good book it"};
const Pool kInfo = {"what is the {v}", "may i have the {v} please",
                    "can you give me the {v}", "do you have its {v}",
                    "could you tell me the {v}"};
const Pool kThanks = {"thank you", "thanks", "thanks a lot", "great thanks",
                      "that's all thank you"};

const Pool kFlightOpen = {"i want to book a flight", "i need a plane ticket",
                          "help me book a flight", "please book a flight for me",
                          "i would like to buy an air ticket"};
const Pool kFlightOpenDate = {"i want to book a flight on {v}",
                              "i need a plane ticket for {v}",
                              "help me book a flight on {v}",
                              "please book a flight for {v}",
                              "i would like to fly on {v}"};
const Pool kCityAnswer = {"{v} please", "it is {v}", "i think {v}", "{v} i guess"};
const Pool kDateAnswer = {"on {v}", "{v} please", "it is {v}", "maybe {v}"};
const Pool kWithhold = {"i am not sure yet", "let me think", "not decided",
                        "i don't know", "hmm"};
const Pool kFlightThanks = {"thank you", "ok thanks", "great", "good",
                            "thanks a lot"};

std::string pick_fill(Rng& rng, const Pool& pool, const std::string& v = {}) {
  return fill(rng.pick(pool), {{"v", v}});
}

std::string render(const Ontology& o, const Pool& pool, const DialogueAct& act,
                   std::size_t variant) {
  std::map<std::string, std::string> vars;
  for (std::size_t i = 0; i < o.slot_count(); ++i) {
    vars[o.slots[i].name] =
        act.values[i] ? o.slots[i].values.at(*act.values[i]) : "unknown";
  }
  return fill(pool[variant % pool.size()], vars);
}

class Dialogue {
 public:
  Dialogue(const Ontology& o, Rng& rng) : o_(o), rng_(rng) {}

  // Appends a turn whose gold act is `act`; the system reply rendered with
  // `variant` becomes the next turn's previous system utterance.
  void turn(std::string user, const DialogueAct& act, std::size_t variant) {
    validate_act(act, o_);
    turns_.push_back({std::move(user), prev_, act});
    const auto& pools = is_flight_ontology(o_) ? flight_system() : restaurant_system();
    prev_ = render(o_, pools.at(o_.act_types[act.type]), act, variant);
  }
  void turn(std::string user, const DialogueAct& act) {
    turn(std::move(user), act, rng_.below(5));
  }
  void ack(std::string user, Ack pool) {
    turn(std::move(user), DialogueAct::empty(o_, o_.act_index("acknowledge")),
         static_cast<std::size_t>(pool) * 5 + rng_.below(5));
  }

  std::vector<Turn> take() { return std::move(turns_); }

 private:
  const Ontology& o_;
  Rng& rng_;
  std::vector<Turn> turns_;
  std::string prev_;
};

std::vector<Turn> restaurant_session(const Ontology& o, TaskMode task, Rng& rng) {
  const std::array<std::size_t, 4> slot = {
      o.slot_index(restaurant::kCuisine), o.slot_index(restaurant::kLocation),
      o.slot_index(restaurant::kPrice), o.slot_index(restaurant::kSize)};
  // Ask order: cuisine, location, size, price.
  const std::array<std::size_t, 4> ask_order = {0, 1, 3, 2};
  const std::array<const char*, 4> ask_act = {"ask_cuisine", "ask_location",
                                              "ask_price", "ask_size"};
  std::array<std::size_t, 4> goal{};
  for (std::size_t k = 0; k < 4; ++k) goal[k] = rng.below(o.slots[slot[k]].values.size());
  auto value = [&](std::size_t k) { return o.slots[slot[k]].values[goal[k]]; };

  Dialogue d(o, rng);
  d.ack(pick_fill(rng, kGreet), Ack::kGreet);

  std::vector<std::size_t> given;
  for (std::size_t k = 0; k < 4; ++k) {
    if (rng.chance(0.5)) given.push_back(k);
  }
  rng.shuffle(given);
  std::string request = rng.pick(kRequestBase);
  for (auto k : given) request += " " + pick_fill(rng, kRequestFragment[k], value(k));
  if (rng.chance(0.3)) request += " please";
  d.ack(request, Ack::kOnIt);

  std::vector<std::size_t> missing;
  for (auto k : ask_order) {
    if (std::find(given.begin(), given.end(), k) == given.end()) missing.push_back(k);
  }
  std::string user = pick_fill(rng, kSilence);
  for (auto k : missing) {
    d.turn(user, DialogueAct::empty(o, o.act_index(ask_act[k])));
    user = pick_fill(rng, kAnswer[k], value(k));
  }
  d.ack(user, Ack::kLookup);

  auto full_act = [&](const char* type) {
    DialogueAct a = DialogueAct::empty(o, o.act_index(type));
    for (std::size_t k = 0; k < 4; ++k) a.set(slot[k], goal[k]);
    return a;
  };
  d.turn(pick_fill(rng, kSilence), full_act("api_call"));
  if (task == TaskMode::kIssue) return d.take();

  const std::size_t updates = 1 + rng.below(2);
  for (std::size_t u = 0; u < updates; ++u) {
    const std::size_t k = rng.below(4);
    const std::size_t n = o.slots[slot[k]].values.size();
    if (n > 1) goal[k] = (goal[k] + 1 + rng.below(n - 1)) % n;
    d.ack(pick_fill(rng, kUpdate[k], value(k)), Ack::kAnythingElse);
  }
  d.ack(pick_fill(rng, kNo), Ack::kLookup);
  d.turn(pick_fill(rng, kSilence), full_act("update_api_call"));
  if (task == TaskMode::kUpdate) return d.take();

  const DialogueAct display = DialogueAct::empty(o, o.act_index("display_options"));
  d.turn(pick_fill(rng, kSilence), display);
  const std::size_t rejections = rng.below(3);
  for (std::size_t r = 0; r < rejections; ++r) d.turn(pick_fill(rng, kReject), display);
  d.ack(pick_fill(rng, kAccept), Ack::kReserve);
  const std::size_t ask = *o.ask_slot;
  const std::size_t infos = 1 + rng.below(2);
  for (std::size_t r = 0; r < infos; ++r) {
    const std::size_t v = rng.below(o.slots[ask].values.size());
    DialogueAct info = DialogueAct::empty(o, o.act_index("give_info"));
    info.set(ask, v);
    d.turn(pick_fill(rng, kInfo, o.slots[ask].values[v]), info);
  }
  d.turn(pick_fill(rng, kThanks), DialogueAct::empty(o, o.act_index("end")));
  return d.take();
}

std::vector<Turn> flight_session(const Ontology& o, Rng& rng) {
  const std::size_t dep = o.slot_index(flight::kDepCity);
  const std::size_t arr = o.slot_index(flight::kArrCity);
  const std::size_t date = o.slot_index(flight::kDate);
  const std::size_t n_city = o.slots[dep].values.size();
  std::array<std::size_t, 3> goal{};
  goal[0] = rng.below(n_city);
  goal[1] = (goal[0] + 1 + rng.below(n_city - 1)) % n_city;
  goal[2] = rng.below(o.slots[date].values.size());
  const std::array<std::size_t, 3> slot = {dep, arr, date};
  const std::array<const char*, 3> ask_act = {"ask_dep_loc", "ask_arr_loc",
                                              "ask_dep_date"};
  auto value = [&](std::size_t k) { return o.slots[slot[k]].values[goal[k]]; };

  std::vector<std::size_t> missing = {0, 1, 2};
  std::string user;
  if (rng.chance(0.35)) {
    user = pick_fill(rng, kFlightOpenDate, value(2));
    missing.pop_back();
  } else {
    user = rng.pick(kFlightOpen);
  }

  Dialogue d(o, rng);
  while (!missing.empty()) {
    const std::size_t pos = rng.below(missing.size());
    const std::size_t k = missing[pos];
    d.turn(user, DialogueAct::empty(o, o.act_index(ask_act[k])));
    if (rng.chance(0.1)) {
      user = rng.pick(kWithhold);
      continue;
    }
    const double bare = k == 2 ? 0.6 : 0.7;
    if (rng.chance(bare)) {
      user = value(k);
    } else {
      user = pick_fill(rng, k == 2 ? kDateAnswer : kCityAnswer, value(k));
    }
    missing.erase(missing.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  DialogueAct offer = DialogueAct::empty(o, o.act_index("offer"));
  for (std::size_t k = 0; k < 3; ++k) offer.set(slot[k], goal[k]);
  d.turn(user, offer);
  d.turn(rng.pick(kFlightThanks), DialogueAct::empty(o, o.act_index("end")));
  return d.take();
}

}  // namespace

Domain parse_domain(const std::string& text) {
  if (text == "restaurant") return Domain::kRestaurant;
  if (text == "flight") return Domain::kFlight;
  throw ConfigError("unknown domain '" + text + "' (expected restaurant|flight)");
}

TaskMode parse_task(const std::string& text) {
  if (text == "1") return TaskMode::kIssue;
  if (text == "2") return TaskMode::kUpdate;
  if (text == "full") return TaskMode::kFull;
  throw ConfigError("unknown task '" + text + "' (expected 1|2|full)");
}

std::string to_string(Domain d) {
  return d == Domain::kRestaurant ? "restaurant" : "flight";
}

std::string to_string(TaskMode t) {
  switch (t) {
    case TaskMode::kIssue: return "1";
    case TaskMode::kUpdate: return "2";
    case TaskMode::kFull: return "full";
  }
  return "?";
}

Ontology build_ontology(const GenConfig& config) {
  return config.domain == Domain::kRestaurant
             ? build_restaurant_ontology(config.restaurant)
             : build_flight_ontology(config.flight);
}

std::vector<Session> generate_split(const Ontology& ontology,
                                    const GenConfig& config,
                                    std::size_t split_index, std::size_t count,
                                    const std::string& prefix) {
  Rng rng(derive_seed(config.seed, split_index));
  std::vector<Session> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s-%05zu", prefix.c_str(), i + 1);
    Session s;
    s.id = id;
    s.turns = config.domain == Domain::kFlight
                  ? flight_session(ontology, rng)
                  : restaurant_session(ontology, config.task, rng);
    out.push_back(std::move(s));
  }
  return out;
}

Corpus generate_corpus(const Ontology& ontology, const GenConfig& config) {
  if (config.domain == Domain::kFlight && !is_flight_ontology(ontology)) {
    throw ConfigError("flight generation needs a flight ontology");
  }
  Corpus c;
  c.train = generate_split(ontology, config, 0, config.sizes.train, "train");
  c.dev = generate_split(ontology, config, 1, config.sizes.dev, "dev");
  c.test = generate_split(ontology, config, 2, config.sizes.test, "test");
  return c;
}

std::string verbalize_act(const Ontology& ontology, const DialogueAct& act,
                          std::size_t variant) {
  const auto& pools =
      is_flight_ontology(ontology) ? flight_system() : restaurant_system();
  const auto it = pools.find(ontology.act_types.at(act.type));
  if (it == pools.end()) return ontology.act_types[act.type];
  return render(ontology, it->second, act, variant);
}

}  // namespace mad
