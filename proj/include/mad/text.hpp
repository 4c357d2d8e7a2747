// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mad/autodiff.hpp"
#include "mad/ontology.hpp"

namespace mad {

/// Lowercase, split on whitespace, strip leading and trailing punctuation
/// from every token. Inner punctuation is kept ("12.25", "i'm").
std::vector<std::string> tokenize(std::string_view text);

/// Tokens of a slot name: lowercase, split on '_' and whitespace.
std::vector<std::string> slot_name_tokens(const std::string& name);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  /// Every token of every utterance in `sessions` plus all slot-name and
  /// slot-value tokens of the ontology.
  static Vocabulary build(const std::vector<Session>& sessions,
                          const Ontology& ontology);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int add(const std::string& token);
  int id(const std::string& token) const;  // kUnk when unknown
  bool contains(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
};

/// Mean of the embedding rows of `ids`; the zero vector for an empty list.
Var embed_utterance(Var table, const std::vector<int>& ids);

/// Plain-value version of `embed_utterance`.
Tensor embed_utterance(const Tensor& table, const std::vector<int>& ids);

/// M^S: row i is the mean embedding of slot i's name tokens. Name tokens
/// missing from the vocabulary are skipped; a slot with none left is an
/// error.
Tensor init_slot_keys(const Ontology& ontology, const Vocabulary& vocab,
                      const Tensor& table);

/// Reads "m |V|" then one "token v1 .. vm" line per token and copies rows
/// for tokens present in `vocab`. Returns the number of rows copied.
std::size_t load_embeddings(const std::string& path, const Vocabulary& vocab,
                            Tensor& table);

}  // namespace mad
