// SPDX-License-Identifier: Apache-2.0
#include "mad/model_io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "mad/corpus_io.hpp"
#include "mad/training.hpp"
#include "mad/error.hpp"

namespace mad {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void bytes(const std::string& s) { out_ += s; }
  void str32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint8_t u8() {
    need(1, "byte");
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str32(const char* what) { return bytes(u32(), what); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw ParseError(std::string("model file truncated while reading ") + what +
                           " at byte " + std::to_string(pos_),
                       0, what);
    }
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::string model_config_text(const ModelConfig& c) {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return "m=" + std::to_string(c.m) + "\n" + "n_e=" + std::to_string(c.n_e) + "\n" +
         "max_tokens=" + std::to_string(c.max_tokens) + "\n" +
         "no_slot_value_memory=" + b(c.no_value_memory) + "\n" +
         "no_attention=" + b(c.no_attention) + "\n" +
         "no_external_memory=" + b(c.no_external_memory) + "\n" +
         "mask_head_inputs=" +
         (c.mask_inputs == MaskHeadInputs::kProse ? "prose" : "formula") + "\n";
}

}  // namespace

std::string serialize_model(const Model& model) {
  Writer w;
  w.bytes("MADM");
  w.u16(kModelFormatVersion);
  w.str32(model_config_text(model.config()));
  w.bytes(model.ontology().hash());
  const auto& tokens = model.vocab().tokens();
  w.u32(static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) w.str32(t);
  const auto& params = model.params().all();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.u8(static_cast<std::uint8_t>(p.value.rank()));
    for (auto e : p.value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (double x : p.value.values()) w.f32(static_cast<float>(x));
  }
  return w.take();
}

Model deserialize_model(const std::string& bytes, const Ontology& ontology) {
  Reader r(bytes);
  if (r.bytes(4, "magic") != "MADM") throw ParseError("not a model file (bad magic)", 0, "magic");
  const std::uint16_t version = r.u16();
  if (version != kModelFormatVersion) {
    throw ParseError("unsupported model format version " + std::to_string(version), 0,
                     "version");
  }
  TrainConfig tc;
  try {
    tc = parse_config(r.str32("config"));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("bad config block: ") + e.what(), 0, "config");
  }
  const std::string hash = r.bytes(16, "ontology hash");
  if (hash != ontology.hash()) {
    throw HashMismatchError("model was trained on ontology " + hash +
                            ", but the supplied ontology is " + ontology.hash());
  }
  std::vector<std::string> tokens(r.u32());
  for (auto& t : tokens) t = r.str32("vocabulary");
  Model model(ontology, Vocabulary::from_tokens(std::move(tokens)), tc.model);

  const std::uint32_t count = r.u32();
  if (count != model.params().size()) {
    throw ParseError("model file has " + std::to_string(count) + " tensors, expected " +
                         std::to_string(model.params().size()),
                     0, "tensors");
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.bytes(r.u16(), "tensor name");
    Parameter& p = model.params()[k];
    if (name != p.name) {
      throw ParseError("unexpected tensor '" + name + "', expected '" + p.name + "'", 0,
                       "tensors");
    }
    Shape shape(r.u8());
    for (auto& e : shape) e = r.u32();
    if (shape != p.value.shape()) {
      throw ParseError("tensor '" + name + "' has shape " + shape_str(shape) +
                           ", expected " + shape_str(p.value.shape()),
                       0, name);
    }
    for (auto& x : p.value.values()) x = static_cast<double>(r.f32());
    if (!p.value.all_finite()) throw ParseError("tensor '" + name + "' has non-finite values", 0, name);
  }
  if (!r.done()) throw ParseError("trailing bytes after the last tensor", 0, "tensors");
  return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_text_file(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path, const Ontology& ontology) {
  return deserialize_model(read_text_file(path), ontology);
}

}  // namespace mad
