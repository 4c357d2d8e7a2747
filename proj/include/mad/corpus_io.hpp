// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. A corpus split is JSON Lines: a header record
// {"format":"mad-corpus","version":1,"ontology_hash":...} followed by one
// session per line. The ontology is a single JSON document carrying its own
// content hash.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mad/ontology.hpp"

namespace mad {

std::string ontology_to_json(const Ontology& ontology);
/// Throws ParseError on schema violations and HashMismatchError when the
/// stored hash disagrees with the content.
Ontology ontology_from_json(const std::string& text);

std::string sessions_to_jsonl(const std::vector<Session>& sessions,
                              const Ontology& ontology);
/// Every act is validated against `ontology`; errors carry the 1-based line.
std::vector<Session> sessions_from_jsonl(const std::string& text,
                                         const Ontology& ontology);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Ontology read_ontology(const std::filesystem::path& path);
void write_ontology(const std::filesystem::path& path, const Ontology& ontology);
std::vector<Session> read_split(const std::filesystem::path& path,
                                const Ontology& ontology);
void write_split(const std::filesystem::path& path,
                 const std::vector<Session>& sessions, const Ontology& ontology);

/// Layout used by `gen`: ontology.json, train.jsonl, dev.jsonl, test.jsonl.
struct Dataset {
  Ontology ontology;
  Corpus corpus;
};
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);
/// Reads ontology.json plus a single split ("train", "dev" or "test").
std::vector<Session> read_dataset_split(const std::filesystem::path& dir,
                                        const std::string& split,
                                        const Ontology& ontology);

}  // namespace mad
