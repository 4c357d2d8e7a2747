// SPDX-License-Identifier: Apache-2.0
#include "mad/corpus_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mad/error.hpp"

namespace mad {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFormat = "mad-corpus";
constexpr int kVersion = 1;

const json& field(const json& obj, const char* name, std::size_t line) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw ParseError(std::string("missing field '") + name + "'", line, name);
  }
  return obj.at(name);
}

std::string string_field(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (!v.is_string()) {
    throw ParseError(std::string("field '") + name + "' must be a string", line, name);
  }
  return v.get<std::string>();
}

json act_to_json(const DialogueAct& act, const Ontology& o) {
  json mask = json::object();
  json values = json::object();
  for (std::size_t i = 0; i < o.slot_count(); ++i) {
    mask[o.slots[i].name] = act.mask[i];
    if (act.values[i]) values[o.slots[i].name] = o.slots[i].values[*act.values[i]];
  }
  return json{{"type", o.act_types[act.type]}, {"mask", mask}, {"values", values}};
}

DialogueAct act_from_json(const json& j, const Ontology& o, std::size_t line) {
  const std::string type = string_field(j, "type", line);
  const auto type_index = o.find_act(type);
  if (!type_index) throw ParseError("unknown act type '" + type + "'", line, "da.type");
  DialogueAct act = DialogueAct::empty(o, *type_index);

  const json& mask = field(j, "mask", line);
  if (!mask.is_object()) throw ParseError("'mask' must be an object", line, "da.mask");
  for (const auto& [name, bit] : mask.items()) {
    const auto slot = o.find_slot(name);
    if (!slot) throw ParseError("unknown slot '" + name + "' in mask", line, "da.mask");
    if (!bit.is_number_integer() || (bit.get<int>() != 0 && bit.get<int>() != 1)) {
      throw ParseError("mask entry for '" + name + "' must be 0 or 1", line, "da.mask");
    }
    act.mask[*slot] = bit.get<int>();
  }

  const json& values = field(j, "values", line);
  if (!values.is_object()) throw ParseError("'values' must be an object", line, "da.values");
  for (const auto& [name, v] : values.items()) {
    const auto slot = o.find_slot(name);
    if (!slot) throw ParseError("unknown slot '" + name + "' in values", line, "da.values");
    if (!v.is_string()) {
      throw ParseError("value for '" + name + "' must be a string", line, "da.values");
    }
    const auto idx = o.find_value(*slot, v.get<std::string>());
    if (!idx) {
      throw ParseError("unknown value '" + v.get<std::string>() + "' for slot '" +
                           name + "'",
                       line, "da.values");
    }
    act.values[*slot] = *idx;
  }
  try {
    validate_act(act, o);
  } catch (const DataError& e) {
    throw ParseError(e.what(), line, "da");
  }
  return act;
}

}  // namespace

std::string ontology_to_json(const Ontology& ontology) {
  json slots = json::array();
  for (const auto& s : ontology.slots) {
    slots.push_back(json{{"name", s.name}, {"values", s.values}});
  }
  json j{{"slots", slots}, {"da_types", ontology.act_types}};
  j["ask_slot"] = ontology.ask_slot ? json(ontology.slots[*ontology.ask_slot].name)
                                    : json(nullptr);
  j["hash"] = ontology.hash();
  return j.dump(2) + "\n";
}

Ontology ontology_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("ontology is not valid JSON: ") + e.what());
  }
  Ontology o;
  const json& slots = field(j, "slots", 0);
  if (!slots.is_array()) throw ParseError("'slots' must be an array", 0, "slots");
  for (const auto& s : slots) {
    Slot slot;
    slot.name = string_field(s, "name", 0);
    const json& values = field(s, "values", 0);
    if (!values.is_array()) throw ParseError("'values' must be an array", 0, "values");
    for (const auto& v : values) {
      if (!v.is_string()) throw ParseError("slot values must be strings", 0, "values");
      slot.values.push_back(v.get<std::string>());
    }
    o.slots.push_back(std::move(slot));
  }
  const json& types = field(j, "da_types", 0);
  if (!types.is_array()) throw ParseError("'da_types' must be an array", 0, "da_types");
  for (const auto& t : types) {
    if (!t.is_string()) throw ParseError("act types must be strings", 0, "da_types");
    o.act_types.push_back(t.get<std::string>());
  }
  const json& ask = field(j, "ask_slot", 0);
  if (ask.is_string()) {
    o.ask_slot = o.find_slot(ask.get<std::string>());
    if (!o.ask_slot) throw ParseError("ask_slot names an unknown slot", 0, "ask_slot");
  } else if (!ask.is_null()) {
    throw ParseError("'ask_slot' must be a string or null", 0, "ask_slot");
  }
  try {
    o.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), 0, "slots");
  }
  const std::string stored = string_field(j, "hash", 0);
  if (stored != o.hash()) {
    throw HashMismatchError("ontology hash " + stored +
                            " does not match its content (" + o.hash() + ")");
  }
  return o;
}

std::string sessions_to_jsonl(const std::vector<Session>& sessions,
                              const Ontology& ontology) {
  std::string out = json{{"format", kFormat},
                         {"version", kVersion},
                         {"ontology_hash", ontology.hash()}}
                        .dump() +
                    "\n";
  for (const auto& s : sessions) {
    json turns = json::array();
    for (const auto& t : s.turns) {
      turns.push_back(json{{"user", t.user},
                           {"system_prev", t.system_prev},
                           {"da", act_to_json(t.act, ontology)}});
    }
    out += json{{"session_id", s.id}, {"turns", turns}}.dump() + "\n";
  }
  return out;
}

std::vector<Session> sessions_from_jsonl(const std::string& text,
                                         const Ontology& ontology) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<Session> sessions;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!header) {
      if (string_field(j, "format", lineno) != kFormat) {
        throw ParseError("not a corpus file", lineno, "format");
      }
      const json& version = field(j, "version", lineno);
      if (!version.is_number_integer() || version.get<int>() != kVersion) {
        throw ParseError("unsupported corpus version", lineno, "version");
      }
      const std::string hash = string_field(j, "ontology_hash", lineno);
      if (hash != ontology.hash()) {
        throw HashMismatchError("corpus was written against ontology " + hash +
                                ", expected " + ontology.hash());
      }
      header = true;
      continue;
    }
    Session s;
    s.id = string_field(j, "session_id", lineno);
    const json& turns = field(j, "turns", lineno);
    if (!turns.is_array() || turns.empty()) {
      throw ParseError("'turns' must be a non-empty array", lineno, "turns");
    }
    for (const auto& t : turns) {
      Turn turn;
      turn.user = string_field(t, "user", lineno);
      turn.system_prev = string_field(t, "system_prev", lineno);
      turn.act = act_from_json(field(t, "da", lineno), ontology, lineno);
      s.turns.push_back(std::move(turn));
    }
    sessions.push_back(std::move(s));
  }
  if (!header) throw ParseError("missing corpus header line", 1, "format");
  return sessions;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

Ontology read_ontology(const std::filesystem::path& path) {
  return ontology_from_json(read_text_file(path));
}

void write_ontology(const std::filesystem::path& path, const Ontology& ontology) {
  write_text_file(path, ontology_to_json(ontology));
}

std::vector<Session> read_split(const std::filesystem::path& path,
                                const Ontology& ontology) {
  return sessions_from_jsonl(read_text_file(path), ontology);
}

void write_split(const std::filesystem::path& path,
                 const std::vector<Session>& sessions, const Ontology& ontology) {
  write_text_file(path, sessions_to_jsonl(sessions, ontology));
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  write_ontology(dir / "ontology.json", data.ontology);
  write_split(dir / "train.jsonl", data.corpus.train, data.ontology);
  write_split(dir / "dev.jsonl", data.corpus.dev, data.ontology);
  write_split(dir / "test.jsonl", data.corpus.test, data.ontology);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.ontology = read_ontology(dir / "ontology.json");
  d.corpus.train = read_split(dir / "train.jsonl", d.ontology);
  d.corpus.dev = read_split(dir / "dev.jsonl", d.ontology);
  d.corpus.test = read_split(dir / "test.jsonl", d.ontology);
  return d;
}

std::vector<Session> read_dataset_split(const std::filesystem::path& dir,
                                        const std::string& split,
                                        const Ontology& ontology) {
  if (split != "train" && split != "dev" && split != "test") {
    throw ConfigError("unknown split '" + split + "' (expected train|dev|test)");
  }
  return read_split(dir / (split + ".jsonl"), ontology);
}

}  // namespace mad
