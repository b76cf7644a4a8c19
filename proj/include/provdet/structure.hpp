#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provdet/common.hpp"
#include "provdet/lexer.hpp"

namespace provdet {

// Shallow view of the first function defined in a snippet, recovered from
// the token stream without building a syntax tree.
struct FunctionShape {
  std::string name;
  bool has_body = false;  // false for Java abstract/interface declarations
  // Statements of the body at every nesting level, each as its code-token
  // texts. A Python docstring (leading bare string) is not a statement.
  // Compound statements count once for their header.
  std::vector<std::vector<std::string>> statements;
  // Comments found inside the body.
  std::vector<std::string> body_comments;
};

// Returns nullopt when the snippet defines no function.
std::optional<FunctionShape> find_function(std::span<const Token> tokens, Language lang);

}  // namespace provdet
