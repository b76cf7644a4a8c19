#include "provdet/vocab.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace provdet {

namespace {

constexpr std::string_view kSpecialNames[kNumSpecials] = {"<pad>", "<unk>", "<enc>"};

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape(std::string_view s, std::size_t line) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 >= s.size()) throw ParseError("dangling escape in vocabulary", line);
    switch (s[++i]) {
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case 't': out.push_back('\t'); break;
      default: throw ParseError("unknown escape in vocabulary", line);
    }
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (std::string_view name : kSpecialNames) add(std::string(name));
}

TokenId Vocabulary::id_of(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

void Vocabulary::add(std::string token) {
  if (ids_.contains(token)) throw ValidationError("duplicate vocabulary entry: " + token);
  const auto id = static_cast<TokenId>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

std::uint64_t Vocabulary::fingerprint() const {
  std::ostringstream out;
  save(out);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : out.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& tok : tokens_) out << escape(tok) << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno <= kNumSpecials) {
      if (line != kSpecialNames[lineno - 1]) {
        throw ParseError("vocabulary header mismatch, expected " +
                             std::string(kSpecialNames[lineno - 1]),
                         lineno);
      }
      continue;
    }
    vocab.add(unescape(line, lineno));
  }
  if (lineno < kNumSpecials) throw ParseError("vocabulary file truncated", lineno);
  return vocab;
}

std::vector<std::string> token_strings(std::string_view code, Language lang,
                                       bool include_comments) {
  std::vector<std::string> out;
  for (auto& tok : lex(code, lang)) {
    if (tok.is_code() || (include_comments && tok.kind == TokenKind::Comment)) {
      out.push_back(std::move(tok.text));
    }
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> streams, std::size_t max_size) {
  if (max_size < kNumSpecials + 1) {
    throw ValidationError("vocabulary max_size must be at least 4");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& stream : streams) {
    for (const auto& tok : stream) ++counts[tok];
  }
  // Specials are reserved even if they appear literally in code.
  for (std::string_view name : kSpecialNames) counts.erase(std::string(name));

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  const std::size_t keep = std::min(ranked.size(), max_size - kNumSpecials);
  for (std::size_t i = 0; i < keep; ++i) vocab.add(std::move(ranked[i].first));
  return vocab;
}

std::vector<TokenId> encode_tokens(std::span<const std::string> tokens, const Vocabulary& vocab,
                                   std::size_t max_len) {
  if (max_len < 2) throw ValidationError("max_len must be at least 2");
  std::vector<TokenId> ids(max_len, kPadId);
  ids[0] = kEncId;
  const std::size_t n = std::min(tokens.size(), max_len - 1);
  for (std::size_t i = 0; i < n; ++i) ids[i + 1] = vocab.id_of(tokens[i]);
  return ids;
}

std::vector<TokenId> encode(std::string_view code, Language lang, const Vocabulary& vocab,
                            std::size_t max_len, bool include_comments) {
  const auto toks = token_strings(code, lang, include_comments);
  return encode_tokens(toks, vocab, max_len);
}

}  // namespace provdet
