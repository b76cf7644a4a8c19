#include "provdet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace provdet {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormatTag = "provdet-checkpoint";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json config_to_json(const EncoderConfig& c) {
  ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["ff_dim"] = c.ff_dim;
  j["max_len"] = c.max_len;
  j["dropout_p"] = c.dropout_p;
  j["projector_dim"] = c.projector_dim;
  j["classifier_input"] = std::string(to_string(c.classifier_input));
  return j;
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.ff_dim = j.at("ff_dim").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.projector_dim = j.at("projector_dim").get<std::size_t>();
  const auto ci = parse_classifier_input(j.at("classifier_input").get<std::string>());
  if (!ci) throw ParseError("checkpoint manifest: unknown classifier_input");
  c.classifier_input = *ci;
  return c;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ck) {
  const auto& p = ck.params;
  if (p.values.size() != p.layout.total_size()) throw ValidationError("checkpoint: parameter buffer does not match layout");
  if (p.config.vocab_size != ck.vocab.size()) throw ValidationError("checkpoint: vocabulary size does not match encoder config");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::string blob(p.values.size() * 4, '\0');
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(p.values[i]);
    for (int b = 0; b < 4; ++b) blob[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }

  std::ostringstream vocab_text;
  ck.vocab.save(vocab_text);

  ordered_json m;
  m["format"] = kFormatTag;
  m["version"] = kCheckpointVersion;
  m["dtype"] = "float32";
  m["byte_order"] = "little";
  m["config"] = config_to_json(p.config);
  m["include_comments"] = ck.include_comments;
  m["vocab_file"] = "vocab.txt";
  m["vocab_hash"] = hex64(ck.vocab.fingerprint());
  m["tensor_file"] = "tensors.bin";
  ordered_json tensors = ordered_json::array();
  for (const auto& b : p.layout.blocks()) {
    ordered_json t;
    t["name"] = b.name;
    t["shape"] = {b.rows, b.cols};
    t["offset"] = b.offset * 4;
    t["nbytes"] = b.size() * 4;
    tensors.push_back(std::move(t));
  }
  m["tensors"] = std::move(tensors);
  if (ck.training) {
    m["training"] = {{"best_epoch", ck.training->best_epoch},
                     {"stop_reason", ck.training->stop_reason}};
  }

  write_file(dir / "tensors.bin", blob);
  write_file(dir / "vocab.txt", vocab_text.str());
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const std::string manifest_text = read_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::parse_error&) {
    throw ParseError("checkpoint manifest is not valid JSON");
  }

  Checkpoint ck;
  std::string vocab_hash, vocab_file, tensor_file;
  nlohmann::json tensors;
  try {
    if (m.at("format").get<std::string>() != kFormatTag) throw ParseError("not a checkpoint manifest");
    const int version = m.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    if (m.at("dtype").get<std::string>() != "float32") throw ValidationError("checkpoint dtype must be float32");
    if (m.value("byte_order", std::string("little")) != "little") throw ValidationError("checkpoint byte order must be little");
    ck.params.config = config_from_json(m.at("config"));
    ck.include_comments = m.at("include_comments").get<bool>();
    vocab_hash = m.at("vocab_hash").get<std::string>();
    vocab_file = m.value("vocab_file", std::string("vocab.txt"));
    tensor_file = m.value("tensor_file", std::string("tensors.bin"));
    tensors = m.at("tensors");
    if (m.contains("training")) {
      TrainingInfo info;
      info.best_epoch = m["training"].at("best_epoch").get<std::size_t>();
      info.stop_reason = m["training"].at("stop_reason").get<std::string>();
      ck.training = info;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }

  ck.params.layout = ParamLayout(ck.params.config);
  const auto& blocks = ck.params.layout.blocks();
  if (!tensors.is_array() || tensors.size() != blocks.size()) {
    throw ValidationError("checkpoint tensor table does not match the encoder config");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& t = tensors[i];
    const auto& b = blocks[i];
    try {
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (t.at("name").get<std::string>() != b.name || shape.size() != 2 || shape[0] != b.rows ||
          shape[1] != b.cols || t.at("offset").get<std::size_t>() != b.offset * 4 ||
          t.at("nbytes").get<std::size_t>() != b.size() * 4) {
        throw ValidationError("checkpoint tensor \"" + b.name + "\" does not match the encoder config");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("checkpoint tensor table: ") + e.what());
    }
  }

  const std::string blob = read_file(dir / tensor_file);
  const std::size_t total = ck.params.layout.total_size();
  if (blob.size() != total * 4) throw ValidationError("checkpoint tensor blob has the wrong size");
  ck.params.values.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[i * 4 + b])) << (8 * b);
    }
    ck.params.values[i] = std::bit_cast<float>(bits);
  }

  std::istringstream vocab_in(read_file(dir / vocab_file));
  ck.vocab = Vocabulary::load(vocab_in);
  if (hex64(ck.vocab.fingerprint()) != vocab_hash) {
    throw ValidationError("vocabulary fingerprint does not match the checkpoint manifest");
  }
  if (ck.vocab.size() != ck.params.config.vocab_size) {
    throw ValidationError("vocabulary size does not match the checkpoint config");
  }
  return ck;
}

}  // namespace provdet
