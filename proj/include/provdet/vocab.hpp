#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provdet/common.hpp"
#include "provdet/lexer.hpp"

namespace provdet {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kEncId = 2;
inline constexpr std::size_t kNumSpecials = 3;
inline constexpr std::size_t kDefaultMaxVocab = 8192;

// Word-level code vocabulary. Ids are dense in [0, size()); ids 0..2 are the
// fixed specials <pad>, <unk> and <enc>.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId id_of(std::string_view token) const;  // kUnkId if absent
  const std::string& token_of(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view token) const;

  // FNV-1a over the serialized form; stored in checkpoints to catch mismatches.
  std::uint64_t fingerprint() const;

  // Text format: three special header lines, then one token per line so that
  // line k (0-based, after the header) holds id k + 3. Backslash, newline,
  // carriage return and tab inside tokens are written as \\, \n, \r, \t.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  // Appends a token; the new id is size() - 1. Throws on duplicates.
  void add(std::string token);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Token strings fed to the vocabulary and encoder: code tokens, plus
// comments when `include_comments` is set. Layout tokens are never included.
std::vector<std::string> token_strings(std::string_view code, Language lang, bool include_comments);

// Most frequent (max_size - 3) strings receive ids 3.. in order of decreasing
// count, ties broken lexicographically. Throws ValidationError if
// max_size < 4.
Vocabulary build_vocab(std::span<const std::vector<std::string>> streams,
                       std::size_t max_size = kDefaultMaxVocab);

// [ENC] + token ids (UNK for out-of-vocabulary), truncated to max_len and
// right-padded with PAD. Requires max_len >= 2.
std::vector<TokenId> encode(std::string_view code, Language lang, const Vocabulary& vocab,
                            std::size_t max_len, bool include_comments = true);

std::vector<TokenId> encode_tokens(std::span<const std::string> tokens, const Vocabulary& vocab,
                                   std::size_t max_len);

}  // namespace provdet
