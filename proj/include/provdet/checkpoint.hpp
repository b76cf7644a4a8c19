#pragma once

// Checkpoint directory layout:
//   manifest.json  format tag, version, dtype, encoder config, vocabulary
//                  fingerprint and the tensor table (name, shape, byte
//                  offset, byte length)
//   tensors.bin    float32 values, little-endian, in layout order
//   vocab.txt      Vocabulary::save output

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "provdet/encoder.hpp"
#include "provdet/vocab.hpp"

namespace provdet {

inline constexpr int kCheckpointVersion = 1;

struct TrainingInfo {
  std::size_t best_epoch = 0;
  std::string stop_reason;
  bool operator==(const TrainingInfo&) const = default;
};

struct Checkpoint {
  ModelParams<float> params;
  Vocabulary vocab;
  bool include_comments = true;
  std::optional<TrainingInfo> training;
};

// Creates the directory if needed and overwrites the three files.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);

// Throws IoError for missing or unreadable files, ParseError for a
// malformed manifest, ValidationError when the tensor table, blob size or
// vocabulary fingerprint disagree with the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace provdet
