// SPDX-License-Identifier: Apache-2.0
//
// Binary model container:
//   "MADM"  u16 version
//   u32 length + config text (key=value lines)
//   16 bytes ontology hash (hex)
//   u32 token count, then per token u32 length + bytes
//   u32 tensor count, then per tensor: u16 name length + name, u8 rank,
//   u32 extents, float32 values
// All integers and floats are little-endian.
#pragma once

#include <filesystem>
#include <string>

#include "mad/model.hpp"

namespace mad {

inline constexpr std::uint16_t kModelFormatVersion = 1;

std::string serialize_model(const Model& model);
/// Throws ParseError on a bad magic, version or truncated data and
/// HashMismatchError when `ontology` is not the one the model was built for.
Model deserialize_model(const std::string& bytes, const Ontology& ontology);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path, const Ontology& ontology);

}  // namespace mad
