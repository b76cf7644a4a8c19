#include "provdet/structure.hpp"

#include <algorithm>
#include <array>
#include <string_view>

namespace provdet {

namespace {

bool is_punct(const Token& t, std::string_view text) {
  return (t.kind == TokenKind::Punctuation || t.kind == TokenKind::Operator) && t.text == text;
}

bool is_open(const Token& t) {
  return t.kind == TokenKind::Punctuation && (t.text == "(" || t.text == "[" || t.text == "{");
}

bool is_close(const Token& t) {
  return t.kind == TokenKind::Punctuation && (t.text == ")" || t.text == "]" || t.text == "}");
}

std::size_t line_indent(std::span<const Token> tokens, std::size_t idx) {
  std::size_t i = idx;
  while (i > 0 && tokens[i - 1].kind != TokenKind::Newline) --i;
  return tokens[i].kind == TokenKind::Indent ? tokens[i].text.size() : 0;
}

std::optional<FunctionShape> python_function(std::span<const Token> tokens) {
  std::size_t def = 0;
  while (def < tokens.size() &&
         !(tokens[def].kind == TokenKind::Keyword && tokens[def].text == "def")) {
    ++def;
  }
  if (def >= tokens.size()) return std::nullopt;
  std::size_t name = def + 1;
  while (name < tokens.size() && tokens[name].kind != TokenKind::Identifier) {
    if (tokens[name].kind != TokenKind::Comment) return std::nullopt;
    ++name;
  }
  if (name >= tokens.size()) return std::nullopt;

  FunctionShape shape;
  shape.name = tokens[name].text;
  const std::size_t def_indent = line_indent(tokens, def);

  // Header ends at the first depth-0 colon after the parameter list.
  std::size_t i = name + 1;
  int depth = 0;
  bool seen_params = false;
  for (; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (is_open(t)) {
      ++depth;
      seen_params = true;
    } else if (is_close(t)) {
      --depth;
    } else if (depth == 0 && seen_params && t.kind == TokenKind::Punctuation && t.text == ":") {
      break;
    }
  }
  if (i >= tokens.size()) return shape;
  shape.has_body = true;
  ++i;

  std::vector<std::string> current;
  bool current_is_string = true;
  bool first_is_docstring = false;
  bool header_line = true;
  depth = 0;
  auto flush = [&] {
    if (!current.empty()) {
      if (shape.statements.empty()) first_is_docstring = current_is_string;
      shape.statements.push_back(std::move(current));
    }
    current.clear();
    current_is_string = true;
  };
  for (; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::Comment) {
      shape.body_comments.push_back(t.text);
      continue;
    }
    if (t.kind == TokenKind::Newline) {
      if (depth == 0) {
        flush();
        header_line = false;
      }
      continue;
    }
    if (t.kind == TokenKind::Indent) continue;
    if (depth == 0 && current.empty() && !header_line) {
      // First code token of a logical line: a dedent to the def level ends
      // the body.
      if (line_indent(tokens, i) <= def_indent) break;
    }
    if (is_open(t)) ++depth;
    if (is_close(t)) depth = std::max(0, depth - 1);
    if (depth == 0 && t.kind == TokenKind::Punctuation && t.text == ";") {
      flush();
      continue;
    }
    current_is_string = current_is_string && t.kind == TokenKind::StringLiteral;
    current.push_back(t.text);
  }
  flush();

  if (first_is_docstring) shape.statements.erase(shape.statements.begin());
  return shape;
}

constexpr std::array<std::string_view, 7> kJavaCompound{"if",     "for",  "while",       "do",
                                                         "switch", "try",  "synchronized"};
constexpr std::array<std::string_view, 3> kJavaContinuation{"else", "catch", "finally"};

template <std::size_t N>
bool in(const std::array<std::string_view, N>& set, std::string_view s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

// Index of the bracket closing the group opened at `open`, or nullopt.
std::optional<std::size_t> match_group(std::span<const Token* const> code, std::size_t open) {
  int depth = 0;
  for (std::size_t k = open; k < code.size(); ++k) {
    if (is_open(*code[k])) ++depth;
    if (is_close(*code[k]) && --depth == 0) return k;
  }
  return std::nullopt;
}

// Index just past the bracket group opened at `open`, or code.size().
std::size_t skip_group(std::span<const Token* const> code, std::size_t open) {
  const auto close = match_group(code, open);
  return close ? *close + 1 : code.size();
}

std::optional<FunctionShape> java_function(std::span<const Token> tokens) {
  std::vector<const Token*> code;
  for (const auto& t : tokens) {
    if (t.is_code()) code.push_back(&t);
  }
  std::size_t paren = code.size();
  int brace = 0;
  for (std::size_t k = 0; k < code.size(); ++k) {
    const Token& t = *code[k];
    if (is_punct(t, "{")) ++brace;
    if (is_punct(t, "}")) --brace;
    if (brace != 0 || !is_punct(t, "(") || k == 0) continue;
    if (code[k - 1]->kind != TokenKind::Identifier) continue;
    if (k >= 2) {
      const Token& before = *code[k - 2];
      if (is_punct(before, ".") || is_punct(before, "@") ||
          (before.kind == TokenKind::Keyword && before.text == "new")) {
        continue;
      }
    }
    paren = k;
    break;
  }
  if (paren == code.size()) return std::nullopt;

  FunctionShape shape;
  shape.name = code[paren - 1]->text;

  std::size_t k = skip_group(code, paren);
  while (k < code.size() && !is_punct(*code[k], "{") && !is_punct(*code[k], ";")) ++k;
  if (k >= code.size() || is_punct(*code[k], ";")) return shape;
  shape.has_body = true;
  const std::size_t body_open = k;
  const auto body_close = match_group(code, body_open);
  const std::size_t end = body_close.value_or(code.size());

  const std::size_t begin_off = code[body_open]->offset;
  const std::size_t end_off = body_close ? code[*body_close]->offset : ~std::size_t{0};
  for (const auto& t : tokens) {
    if (t.kind == TokenKind::Comment && t.offset > begin_off && t.offset < end_off) {
      shape.body_comments.push_back(t.text);
    }
  }

  std::vector<std::string> current;
  auto flush = [&] {
    if (!current.empty()) shape.statements.push_back(std::move(current));
    current.clear();
  };
  int depth = 0;
  for (std::size_t i = body_open + 1; i < end; ++i) {
    const Token& t = *code[i];
    if (depth == 0 && t.kind == TokenKind::Keyword && current.empty() &&
        (in(kJavaCompound, t.text) || in(kJavaContinuation, t.text))) {
      if (in(kJavaCompound, t.text)) shape.statements.push_back({t.text});
      if (i + 1 < end && is_punct(*code[i + 1], "(")) i = skip_group(code, i + 1) - 1;
      continue;
    }
    if (is_punct(t, "(") || is_punct(t, "[")) ++depth;
    if (is_punct(t, ")") || is_punct(t, "]")) depth = std::max(0, depth - 1);
    if (depth == 0 && (is_punct(t, "{") || is_punct(t, "}"))) {
      const bool initializer =
          is_punct(t, "{") && !current.empty() &&
          (is_punct(*code[i - 1], "]") || is_punct(*code[i - 1], "="));
      if (initializer) {
        const std::size_t after = skip_group(code, i);
        for (std::size_t j = i; j < after && j < end; ++j) current.push_back(code[j]->text);
        i = after - 1;
        continue;
      }
      flush();
      continue;
    }
    if (depth == 0 && is_punct(t, ";")) {
      if (!current.empty()) current.push_back(t.text);
      flush();
      continue;
    }
    current.push_back(t.text);
  }
  flush();
  return shape;
}

}  // namespace

std::optional<FunctionShape> find_function(std::span<const Token> tokens, Language lang) {
  return lang == Language::Python ? python_function(tokens) : java_function(tokens);
}

}  // namespace provdet
