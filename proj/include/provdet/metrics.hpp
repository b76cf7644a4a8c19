#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "provdet/common.hpp"
#include "provdet/corpus.hpp"

namespace provdet {

struct CodeMetrics {
  std::size_t nloc = 0;
  std::size_t ccn = 1;
  std::size_t token_count = 0;
  std::size_t lfn = 0;  // characters in the first defined function's name
};

// Lines touched by at least one code token. A token spanning several lines
// (a triple-quoted string) counts every line it covers.
std::size_t nloc(std::string_view code, Language lang);

// 1 + decision points outside comments and strings.
// Python: if, elif, for, while, and, or, except (every `if` keyword, so
// conditional expressions and comprehension filters count).
// Java: if, for, while, case, catch, &&, ||, and the ternary `?` (wildcard
// `?` in generics is not a decision point).
std::size_t ccn(std::string_view code, Language lang);

std::size_t token_count(std::string_view code, Language lang);

// Throws ValidationError if no function definition is found.
std::size_t function_name_length(std::string_view code, Language lang);

CodeMetrics compute_metrics(std::string_view code, Language lang);

struct CorpusSummary {
  std::size_t count = 0;
  double avg_nloc = 0;
  double avg_ccn = 0;
  double avg_tc = 0;
  double avg_lfn = 0;
  std::size_t unique_tokens = 0;
};

// Means over the records plus the size of the union of code-token strings.
// Throws ValidationError on an empty corpus.
CorpusSummary corpus_summary(std::span<const FunctionRecord> records);

}  // namespace provdet
