#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provdet/common.hpp"

namespace provdet {

// One <docstring, function> sample. Within one corpus `id` is unique per
// origin: a generated function keeps the id of the human record whose
// docstring produced it, and that shared id is the pairing key.
struct FunctionRecord {
  std::string id;
  Language language = Language::Python;
  std::string docstring;
  std::string code;
  Origin origin = Origin::Human;
  std::optional<Split> split;

  bool operator==(const FunctionRecord&) const = default;
};

// ---- JSONL -----------------------------------------------------------------

struct LineError {
  std::size_t line;  // 1-based
  std::string message;
};

struct ParsedRecords {
  std::vector<FunctionRecord> records;
  std::vector<LineError> errors;
};

// Parses one record per non-blank line. Malformed lines are collected in
// `errors` and skipped; a duplicate (id, origin) throws ValidationError.
ParsedRecords parse_records(std::istream& in);

// Same, but the first malformed line throws ParseError naming its line.
std::vector<FunctionRecord> parse_records_strict(std::istream& in);

FunctionRecord record_from_json_line(std::string_view line);
std::string record_to_json_line(const FunctionRecord& record);
void write_records(std::ostream& out, std::span<const FunctionRecord> records);

// ---- Noise filtering -------------------------------------------------------

enum class NoiseRule {
  HtmlTags,
  Url,
  NonLiteral,
  Interrogation,
  UnderDevelopment,
  EmptyFunction,
  AutoCode,
};

inline constexpr std::array<NoiseRule, 7> kAllNoiseRules{
    NoiseRule::HtmlTags,         NoiseRule::Url,           NoiseRule::NonLiteral,
    NoiseRule::Interrogation,    NoiseRule::UnderDevelopment, NoiseRule::EmptyFunction,
    NoiseRule::AutoCode};

std::string_view to_string(NoiseRule rule);

// Keyword and tag lists behind the docstring rules. Matching is
// case-insensitive on whole words.
struct NoiseRuleConfig {
  std::vector<std::string> html_tags{"p",  "br", "code", "pre", "a",  "ul",  "li",
                                     "b",  "i",  "em",   "tt",  "div", "span"};
  std::vector<std::string> url_markers{"http://", "https://", "www."};
  std::vector<std::string> interrogatives{"what", "how", "why", "when", "which"};
  std::vector<std::string> under_development{"todo", "fixme", "deprecate", "deprecated",
                                             "hack", "xxx"};
  // Accessor/test prefixes: snake_case forms match as written, camelCase
  // forms require an uppercase letter after the prefix.
  std::vector<std::string> auto_snake_prefixes{"get_", "set_", "is_", "test_"};
  std::vector<std::string> auto_camel_prefixes{"get", "set", "is", "test"};
  std::size_t auto_max_statements = 2;
};

struct FilterVerdict {
  std::set<NoiseRule> violated_rules;
  bool kept() const noexcept { return violated_rules.empty(); }
};

bool rule_fires(NoiseRule rule, const FunctionRecord& record, const NoiseRuleConfig& config = {});

// Evaluates each rule independently; `order` only changes evaluation order.
FilterVerdict apply_noise_filters(const FunctionRecord& record, const NoiseRuleConfig& config = {},
                                  std::span<const NoiseRule> order = kAllNoiseRules);

// ---- Length quantile filter --------------------------------------------------

// Retention interval (low, high] over docstring lengths.
struct QuantileBounds {
  std::size_t low = 0;
  std::size_t high = 0;
  bool contains(std::size_t length) const noexcept { return low < length && length <= high; }
};

// Nearest-rank quantiles: the ceil(q*n)-th order statistic.
QuantileBounds quantile_bounds(std::span<const std::size_t> lengths, double lo_q = 0.10,
                               double hi_q = 0.90);

// Docstring length in characters (UTF-8 code points).
std::size_t docstring_length(std::string_view docstring);

struct Rejection {
  FunctionRecord record;
  FilterVerdict verdict;
  bool out_of_bounds = false;
  bool unlexable = false;
  std::vector<std::string> rule_names() const;
};

struct FilterResult {
  std::vector<FunctionRecord> retained;
  std::vector<Rejection> rejected;
};

FilterResult filter_corpus(std::span<const FunctionRecord> records, const QuantileBounds& bounds,
                           const NoiseRuleConfig& config = {});

// Full curation of human records: noise rules, then length bounds computed
// per language over the noise-free subset.
struct CurationResult {
  FilterResult filtered;
  std::vector<std::pair<Language, QuantileBounds>> bounds;
};
CurationResult curate_records(std::span<const FunctionRecord> records,
                              const NoiseRuleConfig& config = {}, double lo_q = 0.10,
                              double hi_q = 0.90);

std::string rejection_to_json_line(const Rejection& rejection);

// ---- Pairing and splitting -----------------------------------------------------

struct CodePair {
  std::string pair_id;
  std::string docstring;
  FunctionRecord human;
  FunctionRecord generated;
};

struct PairingResult {
  std::vector<CodePair> pairs;  // in human-record order
  std::vector<std::string> unmatched_human;
  std::vector<std::string> unmatched_generated;
};

// Joins on shared id. Throws ValidationError on duplicate ids on either side.
PairingResult pair_records(std::span<const FunctionRecord> humans,
                           std::span<const FunctionRecord> generated);

struct SplitRatios {
  std::size_t train = 8;
  std::size_t valid = 1;
  std::size_t test = 1;
};

// Assigns splits by pairing key (the record id), so both sides of a pair share
// a bucket. Bucket sizes over distinct keys follow the largest-remainder
// rounding of the ratios. Throws ValidationError with fewer keys than buckets.
std::vector<Split> split_dataset(std::span<const FunctionRecord> records, std::uint64_t seed,
                                 const SplitRatios& ratios = {});

// split_dataset over each language's records separately, each with its own
// derived seed. Output is aligned with `records`.
std::vector<Split> split_per_language(std::span<const FunctionRecord> records, std::uint64_t seed,
                                      const SplitRatios& ratios = {});

// Bucket sizes for n keys under `ratios`.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios = {});

// ---- Comment stripping ---------------------------------------------------------

// Removes every comment token. A removed comment leaves a single space only
// where it separated two tokens; lines that lost a comment are right-trimmed;
// line structure (including newlines inside block comments) is kept.
// Throws LexError on unterminated block comments or strings.
std::string strip_comments(std::string_view code, Language lang);

}  // namespace provdet
