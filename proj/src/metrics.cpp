#include "provdet/metrics.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "provdet/lexer.hpp"
#include "provdet/structure.hpp"

namespace provdet {

namespace {

std::size_t lines_spanned(const Token& t) {
  return 1 + static_cast<std::size_t>(std::count(t.text.begin(), t.text.end(), '\n'));
}

bool is_python_decision(const Token& t) {
  if (t.kind != TokenKind::Keyword) return false;
  static const std::unordered_set<std::string_view> kw{"if",  "elif", "for",   "while",
                                                       "and", "or",   "except"};
  return kw.contains(t.text);
}

bool is_java_decision(std::span<const Token* const> code, std::size_t i) {
  const Token& t = *code[i];
  if (t.kind == TokenKind::Keyword) {
    return t.text == "if" || t.text == "for" || t.text == "while" || t.text == "case" ||
           t.text == "catch";
  }
  if (t.kind != TokenKind::Operator) return false;
  if (t.text == "&&" || t.text == "||") return true;
  if (t.text != "?") return false;
  if (i > 0 && code[i - 1]->text == "<") return false;
  if (i + 1 < code.size()) {
    const std::string& next = code[i + 1]->text;
    if (next == ">" || next == ">>" || next == ">>>" || next == "," || next == "extends" ||
        next == "super") {
      return false;
    }
  }
  return true;
}

}  // namespace

std::size_t nloc(std::string_view code, Language lang) {
  std::set<std::size_t> lines;
  for (const auto& t : lex(code, lang)) {
    if (!t.is_code()) continue;
    const std::size_t span = lines_spanned(t);
    for (std::size_t k = 0; k < span; ++k) lines.insert(t.line + k);
  }
  return lines.size();
}

std::size_t ccn(std::string_view code, Language lang) {
  const auto tokens = lex(code, lang);
  std::size_t decisions = 0;
  if (lang == Language::Python) {
    for (const auto& t : tokens) decisions += is_python_decision(t) ? 1 : 0;
  } else {
    std::vector<const Token*> code_tokens;
    for (const auto& t : tokens) {
      if (t.is_code()) code_tokens.push_back(&t);
    }
    for (std::size_t i = 0; i < code_tokens.size(); ++i) {
      decisions += is_java_decision(code_tokens, i) ? 1 : 0;
    }
  }
  return 1 + decisions;
}

std::size_t token_count(std::string_view code, Language lang) {
  const auto tokens = lex(code, lang);
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.is_code(); }));
}

std::size_t function_name_length(std::string_view code, Language lang) {
  const auto tokens = lex(code, lang);
  const auto shape = find_function(tokens, lang);
  if (!shape) throw ValidationError("no function definition found");
  return docstring_length(shape->name);
}

CodeMetrics compute_metrics(std::string_view code, Language lang) {
  return {nloc(code, lang), ccn(code, lang), token_count(code, lang),
          function_name_length(code, lang)};
}

CorpusSummary corpus_summary(std::span<const FunctionRecord> records) {
  if (records.empty()) throw ValidationError("corpus_summary: empty corpus");
  CorpusSummary s;
  std::unordered_set<std::string> vocab;
  double nloc_sum = 0, ccn_sum = 0, tc_sum = 0, lfn_sum = 0;
  for (const auto& r : records) {
    const auto m = compute_metrics(r.code, r.language);
    nloc_sum += static_cast<double>(m.nloc);
    ccn_sum += static_cast<double>(m.ccn);
    tc_sum += static_cast<double>(m.token_count);
    lfn_sum += static_cast<double>(m.lfn);
    for (auto& t : lex(r.code, r.language)) {
      if (t.is_code()) vocab.insert(std::move(t.text));
    }
  }
  const auto n = static_cast<double>(records.size());
  s.count = records.size();
  s.avg_nloc = nloc_sum / n;
  s.avg_ccn = ccn_sum / n;
  s.avg_tc = tc_sum / n;
  s.avg_lfn = lfn_sum / n;
  s.unique_tokens = vocab.size();
  return s;
}

}  // namespace provdet
