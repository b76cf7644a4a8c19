#include "provdet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "json.hpp"
#include "provdet/lexer.hpp"
#include "provdet/rng.hpp"
#include "provdet/structure.hpp"

namespace provdet {

using ordered_json = nlohmann::ordered_json;

// ---- JSONL -----------------------------------------------------------------

namespace {

std::string required_string(const ordered_json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw ParseError(std::string("field \"") + key + "\" is not a string");
  return it->get<std::string>();
}

}  // namespace

FunctionRecord record_from_json_line(std::string_view line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError("record is not a JSON object");

  FunctionRecord rec;
  rec.id = required_string(obj, "id");
  if (rec.id.empty()) throw ParseError("empty id");
  const auto lang = parse_language(required_string(obj, "language"));
  if (!lang) throw ParseError("language must be \"python\" or \"java\"");
  rec.language = *lang;
  rec.docstring = required_string(obj, "docstring");
  rec.code = required_string(obj, "code");
  const auto origin = parse_origin(required_string(obj, "origin"));
  if (!origin) throw ParseError("origin must be \"human\" or \"llm\"");
  rec.origin = *origin;
  if (const auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("field \"split\" is not a string");
    const auto split = parse_split(it->get<std::string>());
    if (!split) throw ParseError("split must be \"train\", \"valid\", \"test\" or null");
    rec.split = *split;
  }
  return rec;
}

std::string record_to_json_line(const FunctionRecord& record) {
  ordered_json obj;
  obj["id"] = record.id;
  obj["language"] = to_string(record.language);
  obj["docstring"] = record.docstring;
  obj["code"] = record.code;
  obj["origin"] = to_string(record.origin);
  obj["split"] = record.split ? ordered_json(to_string(*record.split)) : ordered_json(nullptr);
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void write_records(std::ostream& out, std::span<const FunctionRecord> records) {
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

ParsedRecords parse_records(std::istream& in) {
  ParsedRecords result;
  std::set<std::pair<std::string, Origin>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    FunctionRecord rec;
    try {
      rec = record_from_json_line(line);
    } catch (const ParseError& e) {
      result.errors.push_back({lineno, e.what()});
      continue;
    }
    if (!seen.emplace(rec.id, rec.origin).second) {
      throw ValidationError("duplicate record id \"" + rec.id + "\" (" +
                            std::string(to_string(rec.origin)) + ") at line " +
                            std::to_string(lineno));
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::vector<FunctionRecord> parse_records_strict(std::istream& in) {
  auto parsed = parse_records(in);
  if (!parsed.errors.empty()) {
    const auto& e = parsed.errors.front();
    throw ParseError("line " + std::to_string(e.line) + ": " + e.message, e.line);
  }
  return std::move(parsed.records);
}

// ---- Noise filtering -------------------------------------------------------

std::string_view to_string(NoiseRule rule) {
  switch (rule) {
    case NoiseRule::HtmlTags: return "html_tags";
    case NoiseRule::Url: return "url";
    case NoiseRule::NonLiteral: return "non_literal";
    case NoiseRule::Interrogation: return "interrogation";
    case NoiseRule::UnderDevelopment: return "under_development";
    case NoiseRule::EmptyFunction: return "empty_function";
    case NoiseRule::AutoCode: return "auto_code";
  }
  return "unknown";
}

namespace {

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (is_word_char(c)) {
      cur.push_back(lower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

bool any_word_in(std::string_view text, const std::vector<std::string>& list) {
  for (const auto& w : lower_words(text)) {
    if (std::find(list.begin(), list.end(), w) != list.end()) return true;
  }
  return false;
}

bool has_html_tag(std::string_view doc, const std::vector<std::string>& tags) {
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (doc[i] != '<') continue;
    std::size_t j = i + 1;
    while (j < doc.size() && doc[j] == ' ') ++j;
    if (j < doc.size() && doc[j] == '/') ++j;
    std::string name;
    while (j < doc.size() && std::isalnum(static_cast<unsigned char>(doc[j]))) {
      name.push_back(lower(doc[j++]));
    }
    if (name.empty() || std::find(tags.begin(), tags.end(), name) == tags.end()) continue;
    if (j >= doc.size()) continue;
    if (doc[j] != '>' && doc[j] != ' ' && doc[j] != '/' && doc[j] != '\t' && doc[j] != '\n') {
      continue;
    }
    const std::size_t close = doc.find('>', j);
    const std::size_t next_open = doc.find('<', j);
    if (close != std::string_view::npos && (next_open == std::string_view::npos || close < next_open)) {
      return true;
    }
  }
  return false;
}

bool has_url(std::string_view doc, const std::vector<std::string>& markers) {
  std::string low;
  low.reserve(doc.size());
  for (char c : doc) low.push_back(lower(c));
  return std::any_of(markers.begin(), markers.end(),
                     [&](const std::string& m) { return low.find(m) != std::string::npos; });
}

bool has_non_literal(std::string_view doc) {
  for (char ch : doc) {
    const auto c = static_cast<unsigned char>(ch);
    const bool space = c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && (c < 0x20 || c > 0x7e)) return true;
  }
  return false;
}

bool auto_name(std::string_view name, const NoiseRuleConfig& config) {
  for (const auto& p : config.auto_snake_prefixes) {
    if (name.size() > p.size() && name.starts_with(p)) return true;
  }
  for (const auto& p : config.auto_camel_prefixes) {
    if (name.size() > p.size() && name.starts_with(p) && name[p.size()] >= 'A' &&
        name[p.size()] <= 'Z') {
      return true;
    }
  }
  return false;
}

std::optional<FunctionShape> shape_of(const FunctionRecord& record, bool& has_code) {
  has_code = false;
  std::vector<Token> toks;
  try {
    toks = lex(record.code, record.language);
  } catch (const LexError&) {
    has_code = true;
    return std::nullopt;
  }
  has_code = std::any_of(toks.begin(), toks.end(), [](const Token& t) { return t.is_code(); });
  return find_function(toks, record.language);
}

bool empty_function(const FunctionRecord& record) {
  bool has_code = false;
  const auto shape = shape_of(record, has_code);
  if (!shape) return !has_code;
  if (!shape->has_body || shape->statements.empty()) return true;
  return record.language == Language::Python && shape->statements.size() == 1 &&
         shape->statements[0] == std::vector<std::string>{"pass"};
}

bool auto_code(const FunctionRecord& record, const NoiseRuleConfig& config) {
  bool has_code = false;
  const auto shape = shape_of(record, has_code);
  return shape && auto_name(shape->name, config) &&
         shape->statements.size() <= config.auto_max_statements;
}

}  // namespace

bool rule_fires(NoiseRule rule, const FunctionRecord& record, const NoiseRuleConfig& config) {
  switch (rule) {
    case NoiseRule::HtmlTags: return has_html_tag(record.docstring, config.html_tags);
    case NoiseRule::Url: return has_url(record.docstring, config.url_markers);
    case NoiseRule::NonLiteral: return has_non_literal(record.docstring);
    case NoiseRule::Interrogation:
      return record.docstring.find('?') != std::string::npos ||
             any_word_in(record.docstring, config.interrogatives);
    case NoiseRule::UnderDevelopment:
      return any_word_in(record.docstring, config.under_development);
    case NoiseRule::EmptyFunction: return empty_function(record);
    case NoiseRule::AutoCode: return auto_code(record, config);
  }
  return false;
}

FilterVerdict apply_noise_filters(const FunctionRecord& record, const NoiseRuleConfig& config,
                                  std::span<const NoiseRule> order) {
  FilterVerdict verdict;
  for (NoiseRule rule : order) {
    if (rule_fires(rule, record, config)) verdict.violated_rules.insert(rule);
  }
  return verdict;
}

// ---- Length quantile filter --------------------------------------------------

std::size_t docstring_length(std::string_view docstring) {
  std::size_t n = 0;
  for (char c : docstring) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

QuantileBounds quantile_bounds(std::span<const std::size_t> lengths, double lo_q, double hi_q) {
  if (lengths.empty()) throw ValidationError("quantile_bounds: empty input");
  if (!(lo_q >= 0.0 && lo_q <= hi_q && hi_q <= 1.0)) {
    throw ValidationError("quantile_bounds: need 0 <= lo_q <= hi_q <= 1");
  }
  std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = [&](double q) {
    // Guard against q*n landing a hair above an integer.
    auto r = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    r = std::clamp<std::size_t>(r, 1, sorted.size());
    return sorted[r - 1];
  };
  return {rank(lo_q), rank(hi_q)};
}

std::vector<std::string> Rejection::rule_names() const {
  std::vector<std::string> names;
  for (NoiseRule r : verdict.violated_rules) names.emplace_back(to_string(r));
  if (unlexable) names.emplace_back("unlexable");
  if (out_of_bounds) names.emplace_back("docstring_length");
  return names;
}

namespace {

bool lexes(const FunctionRecord& record) {
  try {
    lex(record.code, record.language);
    return true;
  } catch (const LexError&) {
    return false;
  }
}

}  // namespace

FilterResult filter_corpus(std::span<const FunctionRecord> records, const QuantileBounds& bounds,
                           const NoiseRuleConfig& config) {
  FilterResult result;
  for (const auto& rec : records) {
    Rejection r{rec, apply_noise_filters(rec, config)};
    r.unlexable = !lexes(rec);
    r.out_of_bounds = !bounds.contains(docstring_length(rec.docstring));
    if (r.verdict.kept() && !r.unlexable && !r.out_of_bounds) {
      result.retained.push_back(rec);
    } else {
      result.rejected.push_back(std::move(r));
    }
  }
  return result;
}

CurationResult curate_records(std::span<const FunctionRecord> records,
                              const NoiseRuleConfig& config, double lo_q, double hi_q) {
  std::vector<Rejection> verdicts;
  verdicts.reserve(records.size());
  std::map<Language, std::vector<std::size_t>> clean_lengths;
  for (const auto& rec : records) {
    Rejection r{rec, apply_noise_filters(rec, config)};
    r.unlexable = !lexes(rec);
    if (r.verdict.kept() && !r.unlexable) {
      clean_lengths[rec.language].push_back(docstring_length(rec.docstring));
    }
    verdicts.push_back(std::move(r));
  }

  CurationResult result;
  std::map<Language, QuantileBounds> bounds;
  for (const auto& [lang, lengths] : clean_lengths) {
    bounds[lang] = quantile_bounds(lengths, lo_q, hi_q);
    result.bounds.emplace_back(lang, bounds[lang]);
  }
  for (auto& r : verdicts) {
    if (r.verdict.kept() && !r.unlexable) {
      r.out_of_bounds = !bounds.at(r.record.language).contains(docstring_length(r.record.docstring));
    }
    if (r.verdict.kept() && !r.unlexable && !r.out_of_bounds) {
      result.filtered.retained.push_back(std::move(r.record));
    } else {
      result.filtered.rejected.push_back(std::move(r));
    }
  }
  return result;
}

std::string rejection_to_json_line(const Rejection& rejection) {
  ordered_json obj;
  obj["id"] = rejection.record.id;
  obj["rules"] = rejection.rule_names();
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

// ---- Pairing and splitting -----------------------------------------------------

PairingResult pair_records(std::span<const FunctionRecord> humans,
                           std::span<const FunctionRecord> generated) {
  std::unordered_map<std::string, std::size_t> gen_index;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (!gen_index.emplace(generated[i].id, i).second) {
      throw ValidationError("duplicate generated id \"" + generated[i].id + "\"");
    }
  }
  std::unordered_map<std::string, std::size_t> human_index;
  for (std::size_t i = 0; i < humans.size(); ++i) {
    if (!human_index.emplace(humans[i].id, i).second) {
      throw ValidationError("duplicate human id \"" + humans[i].id + "\"");
    }
  }

  PairingResult result;
  for (const auto& h : humans) {
    const auto it = gen_index.find(h.id);
    if (it == gen_index.end()) {
      result.unmatched_human.push_back(h.id);
      continue;
    }
    CodePair pair{h.id, h.docstring, h, generated[it->second]};
    pair.human.origin = Origin::Human;
    pair.generated.origin = Origin::LLM;
    pair.generated.docstring = h.docstring;
    result.pairs.push_back(std::move(pair));
  }
  for (const auto& g : generated) {
    if (!human_index.contains(g.id)) result.unmatched_generated.push_back(g.id);
  }
  return result;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const std::array<std::size_t, 3> r{ratios.train, ratios.valid, ratios.test};
  const std::size_t total = r[0] + r[1] + r[2];
  if (total == 0) throw ValidationError("split ratios sum to zero");
  std::array<std::size_t, 3> sizes{};
  std::array<std::size_t, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = n * r[i] / total;
    rem[i] = n * r[i] % total;
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

std::vector<Split> split_dataset(std::span<const FunctionRecord> records, std::uint64_t seed,
                                 const SplitRatios& ratios) {
  std::vector<std::string> keys;
  keys.reserve(records.size());
  for (const auto& r : records) keys.push_back(r.id);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  if (keys.size() < 3) {
    throw ValidationError("split_dataset: need at least 3 distinct keys, got " +
                          std::to_string(keys.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(keys));
  const auto sizes = split_sizes(keys.size(), ratios);

  std::unordered_map<std::string, Split> bucket;
  std::size_t k = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) bucket[keys[k++]] = Split::Train;
  for (std::size_t i = 0; i < sizes[1]; ++i) bucket[keys[k++]] = Split::Valid;
  for (std::size_t i = 0; i < sizes[2]; ++i) bucket[keys[k++]] = Split::Test;

  std::vector<Split> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(bucket.at(r.id));
  return out;
}

std::vector<Split> split_per_language(std::span<const FunctionRecord> records, std::uint64_t seed,
                                      const SplitRatios& ratios) {
  std::vector<Split> out(records.size(), Split::Train);
  for (Language lang : {Language::Python, Language::Java}) {
    std::vector<FunctionRecord> subset;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].language != lang) continue;
      subset.push_back(records[i]);
      where.push_back(i);
    }
    if (subset.empty()) continue;
    const auto splits = split_dataset(subset, derive_seed(seed, static_cast<std::uint64_t>(lang)), ratios);
    for (std::size_t j = 0; j < where.size(); ++j) out[where[j]] = splits[j];
  }
  return out;
}

// ---- Comment stripping ---------------------------------------------------------

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

class StrippedWriter {
 public:
  // Layout character; a newline closes the current line.
  void put(char c) {
    if (c == '\n') end_line();
    out_.push_back(c);
  }
  // Characters inside a token; never trimmed.
  void put_raw(std::string_view s) {
    for (char c : s) {
      if (c == '\n') marked_ = false;
      out_.push_back(c);
    }
  }
  void mark() { marked_ = true; }
  bool after_blank() const { return out_.empty() || is_blank(out_.back()); }
  std::string finish() {
    end_line();
    return std::move(out_);
  }

 private:
  void end_line() {
    if (marked_) {
      const bool cr = !out_.empty() && out_.back() == '\r';
      if (cr) out_.pop_back();
      while (!out_.empty() && (out_.back() == ' ' || out_.back() == '\t')) out_.pop_back();
      if (cr) out_.push_back('\r');
    }
    marked_ = false;
  }

  std::string out_;
  bool marked_ = false;
};

}  // namespace

std::string strip_comments(std::string_view code, Language lang) {
  const auto tokens = lex(code, lang);
  StrippedWriter w;
  std::size_t pos = 0;
  for (const auto& tok : tokens) {
    for (; pos < tok.offset; ++pos) w.put(code[pos]);
    const std::size_t end = tok.offset + tok.text.size();
    if (tok.kind != TokenKind::Comment) {
      if (tok.kind == TokenKind::Newline) {
        w.put('\n');
      } else {
        w.put_raw(tok.text);
      }
      pos = end;
      continue;
    }
    w.mark();
    const bool newline_inside = tok.text.find('\n') != std::string::npos;
    const bool blank_after = end >= code.size() || is_blank(code[end]);
    if (!newline_inside && !w.after_blank() && !blank_after) w.put(' ');
    for (char c : tok.text) {
      if (c == '\n') {
        w.put('\n');
        w.mark();
      }
    }
    pos = end;
  }
  for (; pos < code.size(); ++pos) w.put(code[pos]);
  return w.finish();
}

}  // namespace provdet
