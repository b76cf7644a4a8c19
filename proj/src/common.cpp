#include "provdet/common.hpp"

namespace provdet {

std::string_view to_string(Language lang) {
  return lang == Language::Python ? "python" : "java";
}

std::string_view to_string(Origin origin) { return origin == Origin::Human ? "human" : "llm"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

std::optional<Language> parse_language(std::string_view s) {
  if (s == "python") return Language::Python;
  if (s == "java") return Language::Java;
  return std::nullopt;
}

std::optional<Origin> parse_origin(std::string_view s) {
  if (s == "human") return Origin::Human;
  if (s == "llm") return Origin::LLM;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

}  // namespace provdet
