#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "provdet/common.hpp"

namespace provdet {

enum class TokenKind {
  Keyword,
  Identifier,
  NumberLiteral,
  StringLiteral,
  Operator,
  Punctuation,
  Comment,
  Newline,
  // Leading whitespace of a Python line; its text is the whitespace itself.
  Indent,
};

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
  std::size_t offset = 0;  // byte offset into the source

  // Kinds that count as code: everything except comments and layout.
  bool is_code() const noexcept {
    return kind != TokenKind::Comment && kind != TokenKind::Newline && kind != TokenKind::Indent;
  }
};

class LexError : public ParseError {
 public:
  LexError(const std::string& what, std::size_t line, std::size_t column)
      : ParseError(what + " at " + std::to_string(line) + ":" + std::to_string(column), line),
        column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

// Tokenizes a Python or Java snippet. Every byte of the input lands either in
// exactly one token or in skipped inter-token whitespace (including Python
// backslash continuations). Throws LexError on unterminated strings or block
// comments, reporting the opening position.
std::vector<Token> lex(std::string_view code, Language lang);

bool is_keyword(std::string_view word, Language lang);

}  // namespace provdet
