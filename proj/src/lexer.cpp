#include "provdet/lexer.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

namespace provdet {

namespace {

const std::unordered_set<std::string_view>& python_keywords() {
  static const std::unordered_set<std::string_view> kw{
      "False", "None",   "True",    "and",      "as",     "assert", "async", "await",
      "break", "class",  "continue", "def",     "del",    "elif",   "else",  "except",
      "finally", "for",  "from",    "global",   "if",     "import", "in",    "is",
      "lambda", "nonlocal", "not",  "or",       "pass",   "raise",  "return", "try",
      "while", "with",   "yield"};
  return kw;
}

const std::unordered_set<std::string_view>& java_keywords() {
  static const std::unordered_set<std::string_view> kw{
      "abstract", "assert",     "boolean",   "break",     "byte",      "case",
      "catch",    "char",       "class",     "const",     "continue",  "default",
      "do",       "double",     "else",      "enum",      "extends",   "final",
      "finally",  "float",      "for",       "goto",      "if",        "implements",
      "import",   "instanceof", "int",       "interface", "long",      "native",
      "new",      "package",    "private",   "protected", "public",    "return",
      "short",    "static",     "strictfp",  "super",     "switch",    "synchronized",
      "this",     "throw",      "throws",    "transient", "try",       "void",
      "volatile", "while",      "true",      "false",     "null"};
  return kw;
}

// Longest match first within each list.
constexpr std::array<std::string_view, 47> kPythonOps{
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "<<", ">>",
    "**",  "//",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "@=", "+",  "-",
    "*",   "/",   "%",   "@",   "&",   "|",  "^",  "~",  "<",  ">",  "=",  "!",  "?",
    "$",   "`",   "(",   ")",   "[",   "]",  "{",  "}"};

constexpr std::array<std::string_view, 49> kJavaOps{
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||",
    "++",   "--",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "<<", ">>", "+",
    "-",    "*",   "/",   "%",   "&",   "|",  "^",  "~",  "!",  "<",  ">",  "=",  "?",
    "@",    "#",   "`",   "\\",  "(",   ")",  "[",  "]",  "{",  "}"};

bool is_ident_start(unsigned char c, Language lang) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80 ||
         (lang == Language::Java && c == '$');
}

bool is_ident_char(unsigned char c, Language lang) {
  return is_ident_start(c, lang) || (c >= '0' && c <= '9');
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_python_string_prefix(std::string_view word) {
  if (word.empty() || word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(c | 0x20));
  static constexpr std::array<std::string_view, 10> prefixes{"r", "u", "b", "f", "br",
                                                             "rb", "fr", "rf", "ur", "ru"};
  return std::find(prefixes.begin(), prefixes.end(), lower) != prefixes.end();
}

class Lexer {
 public:
  Lexer(std::string_view src, Language lang) : src_(src), lang_(lang) {}

  std::vector<Token> run() {
    bool line_start = true;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (line_start && lang_ == Language::Python) {
        line_start = false;
        std::size_t end = pos_;
        while (end < src_.size() && (src_[end] == ' ' || src_[end] == '\t')) ++end;
        if (end > pos_ && end < src_.size() && src_[end] != '\n' && src_[end] != '\r') {
          emit(TokenKind::Indent, end - pos_);
          continue;
        }
      }
      line_start = false;
      if (c == '\n') {
        emit(TokenKind::Newline, 1);
        line_start = true;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        advance(1);
        continue;
      }
      if (c == '\\' && lang_ == Language::Python) {
        // Explicit line join: the backslash and newline are layout, not tokens.
        std::size_t k = pos_ + 1;
        while (k < src_.size() && src_[k] == '\r') ++k;
        if (k < src_.size() && src_[k] == '\n') {
          advance(k + 1 - pos_);
          continue;
        }
      }
      if (lang_ == Language::Python && c == '#') {
        emit(TokenKind::Comment, to_eol(pos_) - pos_);
        continue;
      }
      if (lang_ == Language::Java && c == '/' && peek(1) == '/') {
        emit(TokenKind::Comment, to_eol(pos_) - pos_);
        continue;
      }
      if (lang_ == Language::Java && c == '/' && peek(1) == '*') {
        const std::size_t close = src_.find("*/", pos_ + 2);
        if (close == std::string_view::npos) {
          throw LexError("unterminated block comment", line_, col_);
        }
        emit(TokenKind::Comment, close + 2 - pos_);
        continue;
      }
      if (c == '"' || c == '\'') {
        if (lang_ == Language::Java && c == '\'') {
          lex_quoted(pos_, '\'');
        } else {
          lex_string(pos_);
        }
        continue;
      }
      if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
        lex_number();
        continue;
      }
      if (is_ident_start(static_cast<unsigned char>(c), lang_)) {
        std::size_t end = pos_;
        while (end < src_.size() && is_ident_char(static_cast<unsigned char>(src_[end]), lang_)) {
          ++end;
        }
        const std::string_view word = src_.substr(pos_, end - pos_);
        if (lang_ == Language::Python && end < src_.size() &&
            (src_[end] == '"' || src_[end] == '\'') && is_python_string_prefix(word)) {
          lex_string(end);
          continue;
        }
        emit(is_keyword(word, lang_) ? TokenKind::Keyword : TokenKind::Identifier, end - pos_);
        continue;
      }
      if (c == '.' && peek(1) == '.' && peek(2) == '.') {
        emit(TokenKind::Operator, 3);
        continue;
      }
      if (c == ',' || c == ';' || c == '.') {
        emit(TokenKind::Punctuation, 1);
        continue;
      }
      lex_operator();
    }
    return std::move(tokens_);
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  std::size_t to_eol(std::size_t from) const {
    std::size_t end = src_.find('\n', from);
    if (end == std::string_view::npos) end = src_.size();
    // A trailing carriage return belongs to layout, not the comment.
    while (end > from && src_[end - 1] == '\r') --end;
    return end;
  }

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (src_[pos_ + i] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
    pos_ += n;
  }

  void emit(TokenKind kind, std::size_t len) {
    tokens_.push_back(Token{kind, std::string(src_.substr(pos_, len)), line_, col_, pos_});
    advance(len);
  }

  // Python string with optional prefix starting at pos_; quote at `quote_pos`.
  void lex_string(std::size_t quote_pos) {
    const char q = src_[quote_pos];
    const bool triple = quote_pos + 2 < src_.size() && src_[quote_pos + 1] == q &&
                        src_[quote_pos + 2] == q;
    if (!triple) {
      lex_quoted(quote_pos, q);
      return;
    }
    std::size_t i = quote_pos + 3;
    while (i < src_.size()) {
      if (src_[i] == '\\') {
        i += 2;
        continue;
      }
      if (src_[i] == q && i + 2 < src_.size() && src_[i + 1] == q && src_[i + 2] == q) {
        emit(TokenKind::StringLiteral, i + 3 - pos_);
        return;
      }
      ++i;
    }
    throw LexError("unterminated string literal", line_, col_);
  }

  void lex_quoted(std::size_t quote_pos, char q) {
    std::size_t i = quote_pos + 1;
    while (i < src_.size()) {
      const char c = src_[i];
      if (c == '\\') {
        // Escaped newline continues a Python short string.
        i += 2;
        continue;
      }
      if (c == '\n') break;
      if (c == q) {
        emit(TokenKind::StringLiteral, i + 1 - pos_);
        return;
      }
      ++i;
    }
    throw LexError("unterminated string literal", line_, col_);
  }

  void lex_number() {
    std::size_t i = pos_;
    const bool hex = src_[i] == '0' && i + 1 < src_.size() && (src_[i + 1] == 'x' || src_[i + 1] == 'X');
    bool seen_dot = false;
    while (i < src_.size()) {
      const char c = src_[i];
      if (is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
        ++i;
        continue;
      }
      if (c == '.' && !seen_dot && i + 1 < src_.size() && src_[i + 1] != '.' &&
          !is_ident_start(static_cast<unsigned char>(src_[i + 1]), lang_)) {
        seen_dot = true;
        ++i;
        continue;
      }
      if ((c == '+' || c == '-') && i > pos_) {
        const char prev = src_[i - 1];
        const bool exponent = hex ? (prev == 'p' || prev == 'P') : (prev == 'e' || prev == 'E');
        if (exponent) {
          ++i;
          continue;
        }
      }
      break;
    }
    emit(TokenKind::NumberLiteral, i - pos_);
  }

  void lex_operator() {
    const std::string_view rest = src_.substr(pos_);
    auto try_ops = [&](const auto& ops) -> bool {
      for (std::string_view op : ops) {
        if (rest.starts_with(op)) {
          const bool bracket = op.size() == 1 && (op[0] == '(' || op[0] == ')' || op[0] == '[' ||
                                                  op[0] == ']' || op[0] == '{' || op[0] == '}');
          emit(bracket ? TokenKind::Punctuation : TokenKind::Operator, op.size());
          return true;
        }
      }
      return false;
    };
    if (lang_ == Language::Python ? try_ops(kPythonOps) : try_ops(kJavaOps)) return;
    if (src_[pos_] == ':') {
      // Python ':=' and Java '::' are in the operator lists; a lone colon is
      // punctuation.
      emit(TokenKind::Punctuation, 1);
      return;
    }
    // Stray byte (e.g. a control character): keep coverage with a one-byte token.
    emit(TokenKind::Operator, 1);
  }

  std::string_view src_;
  Language lang_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  std::vector<Token> tokens_;
};

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::NumberLiteral: return "number";
    case TokenKind::StringLiteral: return "string";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punctuation: return "punctuation";
    case TokenKind::Comment: return "comment";
    case TokenKind::Newline: return "newline";
    case TokenKind::Indent: return "indent";
  }
  return "unknown";
}

bool is_keyword(std::string_view word, Language lang) {
  return lang == Language::Python ? python_keywords().contains(word)
                                  : java_keywords().contains(word);
}

std::vector<Token> lex(std::string_view code, Language lang) { return Lexer(code, lang).run(); }

}  // namespace provdet
