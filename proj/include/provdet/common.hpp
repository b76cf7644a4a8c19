#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace provdet {

enum class Language { Python, Java };
enum class Origin { Human, LLM };
enum class Split { Train, Valid, Test };

std::string_view to_string(Language lang);
std::string_view to_string(Origin origin);
std::string_view to_string(Split split);

std::optional<Language> parse_language(std::string_view s);
std::optional<Origin> parse_origin(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

// Error categories map onto CLI exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed lines, schema violations, lexing failures.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(what), line_(line) {}
  // 1-based line index in the offending stream, 0 when not applicable.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Contract violations on otherwise well-formed data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace provdet
