// SPDX-License-Identifier: Apache-2.0
#include "mad/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "mad/error.hpp"

namespace mad {

namespace {
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_punct(text[b])) ++b;
    while (e > b && is_punct(text[e - 1])) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::vector<std::string> slot_name_tokens(const std::string& name) {
  std::string spaced = name;
  for (auto& c : spaced) {
    if (c == '_') c = ' ';
  }
  return tokenize(spaced);
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::build(const std::vector<Session>& sessions,
                             const Ontology& ontology) {
  Vocabulary v;
  for (const auto& slot : ontology.slots) {
    for (const auto& t : slot_name_tokens(slot.name)) v.add(t);
    for (const auto& value : slot.values) {
      for (const auto& t : tokenize(value)) v.add(t);
    }
  }
  for (const auto& s : sessions) {
    for (const auto& turn : s.turns) {
      for (const auto& t : tokenize(turn.user)) v.add(t);
      for (const auto& t : tokenize(turn.system_prev)) v.add(t);
    }
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw ParseError("vocabulary must start with <pad> and <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw ParseError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Var embed_utterance(Var table, const std::vector<int>& ids) {
  if (ids.empty()) {
    return table.tape->constant(Tensor::zeros({table.value().cols()}));
  }
  return mean_rows(gather_rows(table, ids));
}

Tensor embed_utterance(const Tensor& table, const std::vector<int>& ids) {
  Tensor out = Tensor::zeros({table.cols()});
  if (ids.empty()) return out;
  for (int id : ids) {
    const auto r = table.row(static_cast<std::size_t>(id));
    kernels::axpy(1.0, r.data(), out.data(), r.size());
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& x : out.values()) x *= inv;
  return out;
}

Tensor init_slot_keys(const Ontology& ontology, const Vocabulary& vocab,
                      const Tensor& table) {
  Tensor keys = Tensor::zeros({ontology.slot_count(), table.cols()});
  for (std::size_t i = 0; i < ontology.slot_count(); ++i) {
    std::vector<int> ids;
    for (const auto& t : slot_name_tokens(ontology.slots[i].name)) {
      if (vocab.contains(t)) ids.push_back(vocab.id(t));
    }
    if (ids.empty()) {
      throw DataError("slot name '" + ontology.slots[i].name +
                      "' is entirely out of vocabulary");
    }
    const Tensor mean = embed_utterance(table, ids);
    std::copy(mean.values().begin(), mean.values().end(), keys.row(i).begin());
  }
  return keys;
}

std::size_t load_embeddings(const std::string& path, const Vocabulary& vocab,
                            Tensor& table) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embedding file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty embedding file", 1);
  std::istringstream header(line);
  std::size_t dim = 0, count = 0;
  if (!(header >> dim >> count)) {
    throw ParseError("header must be 'm |V|'", 1, "header");
  }
  if (dim != table.cols()) {
    throw ParseError("embedding width " + std::to_string(dim) +
                         " does not match model width " +
                         std::to_string(table.cols()),
                     1, "m");
  }
  std::size_t copied = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    std::vector<double> vals(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!(row >> vals[k])) {
        throw ParseError("expected " + std::to_string(dim) + " values", lineno,
                         token);
      }
    }
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    if (id == Vocabulary::kPad) continue;
    std::copy(vals.begin(), vals.end(), table.row(static_cast<std::size_t>(id)).begin());
    ++copied;
  }
  return copied;
}

}  // namespace mad
