#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "provdet/corpus.hpp"
#include "provdet/lexer.hpp"
#include "provdet/metrics.hpp"
#include "provdet/rng.hpp"
#include "random_records.hpp"

using namespace provdet;

namespace {

FunctionRecord rec(std::string id, std::string doc, std::string code, Language lang = Language::Python,
                   Origin origin = Origin::Human) {
  return {std::move(id), lang, std::move(doc), std::move(code), origin, std::nullopt};
}

std::set<NoiseRule> violated(const std::string& doc, const std::string& code = "def f(a, b):\n    return a + b\n") {
  return apply_noise_filters(rec("x", doc, code)).violated_rules;
}

}  // namespace

// ---- JSONL -------------------------------------------------------------------

TEST(Records, EmptyStream) {
  std::istringstream in("");
  const auto parsed = parse_records(in);
  EXPECT_TRUE(parsed.records.empty());
  EXPECT_TRUE(parsed.errors.empty());
}

TEST(Records, ParsesInOrder) {
  std::istringstream in(
      R"({"id":"a","language":"python","docstring":"d","code":"c","origin":"human","split":null})"
      "\n"
      R"({"id":"b","language":"java","docstring":"d","code":"c","origin":"llm","split":"test"})"
      "\n"
      R"({"id":"c","language":"python","docstring":"d","code":"c","origin":"human"})"
      "\n");
  const auto parsed = parse_records(in);
  ASSERT_EQ(parsed.records.size(), 3u);
  EXPECT_EQ(parsed.records[0].id, "a");
  EXPECT_EQ(parsed.records[1].language, Language::Java);
  EXPECT_EQ(parsed.records[1].split, Split::Test);
  EXPECT_EQ(parsed.records[2].id, "c");
}

TEST(Records, MissingFieldNamesLine) {
  const std::string text =
      R"({"id":"a","language":"python","docstring":"d","code":"c","origin":"human"})"
      "\n"
      R"({"id":"b","language":"python","docstring":"d","origin":"human"})"
      "\n";
  std::istringstream in(text);
  const auto parsed = parse_records(in);
  ASSERT_EQ(parsed.errors.size(), 1u);
  EXPECT_EQ(parsed.errors[0].line, 2u);
  EXPECT_EQ(parsed.records.size(), 1u);

  std::istringstream strict(text);
  try {
    parse_records_strict(strict);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Records, DuplicateIdIsHardError) {
  std::istringstream in(
      R"({"id":"a","language":"python","docstring":"d","code":"c","origin":"human"})"
      "\n"
      R"({"id":"a","language":"python","docstring":"e","code":"c","origin":"human"})"
      "\n");
  EXPECT_THROW(parse_records(in), ValidationError);
}

TEST(Records, SameIdDifferentOriginIsAPair) {
  std::istringstream in(
      R"({"id":"a","language":"python","docstring":"d","code":"c","origin":"human"})"
      "\n"
      R"({"id":"a","language":"python","docstring":"d","code":"c2","origin":"llm"})"
      "\n");
  EXPECT_EQ(parse_records(in).records.size(), 2u);
}

TEST(Records, SerializeRoundTrip) {
  auto records = provdet::testing::random_records(200, 5);
  records[3].split = Split::Valid;
  records[4].origin = Origin::LLM;
  std::stringstream ss;
  write_records(ss, records);
  EXPECT_EQ(parse_records_strict(ss), records);
}

// ---- Noise rules -------------------------------------------------------------------

TEST(Noise, HtmlTags) { EXPECT_EQ(violated("Returns <p>the sum</p>"), std::set{NoiseRule::HtmlTags}); }

TEST(Noise, Url) { EXPECT_EQ(violated("See https://example.com"), std::set{NoiseRule::Url}); }

TEST(Noise, CleanRecordKept) {
  EXPECT_TRUE(apply_noise_filters(rec("x", "Adds two numbers.", "def add(a, b):\n    return a+b\n")).kept());
}

TEST(Noise, SeveralRulesAtOnce) {
  EXPECT_EQ(violated("TODO: how should this work?"),
            (std::set{NoiseRule::Interrogation, NoiseRule::UnderDevelopment}));
}

TEST(Noise, PassOnlyBodyIsEmpty) {
  EXPECT_EQ(violated("Does things.", "def f(x):\n    pass\n"), std::set{NoiseRule::EmptyFunction});
  const auto java = rec("j", "Does things.", "void run() {\n}\n", Language::Java);
  EXPECT_EQ(apply_noise_filters(java).violated_rules, std::set{NoiseRule::EmptyFunction});
}

TEST(Noise, NonAsciiDocstring) { EXPECT_EQ(violated("Returns the caf\xc3\xa9 list."), std::set{NoiseRule::NonLiteral}); }

TEST(Noise, AccessorsAreAutoCode) {
  EXPECT_EQ(violated("Returns the name.", "def get_name(self):\n    return self.name\n"),
            std::set{NoiseRule::AutoCode});
  const auto java = rec("j", "Returns the name.", "String getName() { return name; }", Language::Java);
  EXPECT_EQ(apply_noise_filters(java).violated_rules, std::set{NoiseRule::AutoCode});
  // a long getter is real code
  EXPECT_TRUE(violated("Returns the name.",
                       "def get_name(self):\n    a = 1\n    b = 2\n    c = 3\n    return a\n")
                  .empty());
  // "getaway" is not a camelCase accessor
  const auto word = rec("j", "Runs.", "int getaway() { return 1; }", Language::Java);
  EXPECT_TRUE(apply_noise_filters(word).kept());
}

// ---- Quantiles and filtering -------------------------------------------------------

TEST(Quantiles, NearestRank) {
  std::vector<std::size_t> lengths(10);
  std::iota(lengths.begin(), lengths.end(), 1);
  const auto b = quantile_bounds(lengths);
  EXPECT_EQ(b.low, 1u);
  EXPECT_EQ(b.high, 9u);
  for (std::size_t len = 1; len <= 10; ++len) EXPECT_EQ(b.contains(len), len >= 2 && len <= 9) << len;
}

TEST(Quantiles, AllEqualRetainsNothing) {
  const std::vector<std::size_t> lengths(7, 5);
  const auto b = quantile_bounds(lengths);
  EXPECT_EQ(b.low, 5u);
  EXPECT_EQ(b.high, 5u);
  EXPECT_FALSE(b.contains(5));
}

TEST(Quantiles, EmptyThrows) { EXPECT_ANY_THROW(quantile_bounds({})); }

TEST(Quantiles, LengthCountsCodePoints) {
  EXPECT_EQ(docstring_length("abc"), 3u);
  EXPECT_EQ(docstring_length("caf\xc3\xa9"), 4u);
}

TEST(Filter, AllCleanInputKeepsEverything) {
  std::vector<FunctionRecord> rs;
  for (int i = 0; i < 4; ++i) rs.push_back(rec("c" + std::to_string(i), "Adds the numbers.", "def f(a):\n    return a\n"));
  const auto r = filter_corpus(rs, QuantileBounds{0, 100});
  EXPECT_EQ(r.retained.size(), 4u);
  EXPECT_TRUE(r.rejected.empty());
}

TEST(Filter, UrlOnlyRejection) {
  const std::vector<FunctionRecord> rs{rec("u", "See www.example.com docs", "def f(a):\n    return a\n")};
  const auto r = filter_corpus(rs, QuantileBounds{0, 100});
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].verdict.violated_rules, std::set{NoiseRule::Url});
  EXPECT_FALSE(r.rejected[0].out_of_bounds);
  EXPECT_EQ(rejection_to_json_line(r.rejected[0]), R"({"id":"u","rules":["url"]})");
}

TEST(Filter, TenRecordsThreeNoisyTwoOutOfBounds) {
  const std::string code = "def f(a):\n    return a\n";
  std::vector<FunctionRecord> rs;
  for (int i = 0; i < 5; ++i) rs.push_back(rec("ok" + std::to_string(i), "Sums the values.", code));
  rs.push_back(rec("n1", "Sums <b>values</b>.", code));
  rs.push_back(rec("n2", "Why sums the values.", code));
  rs.push_back(rec("n3", "Sums the values.", "def f(a):\n    pass\n"));
  rs.push_back(rec("short", "Sums.", code));
  rs.push_back(rec("long", "Sums the values of the list in reverse order and returns it.", code));
  const auto r = filter_corpus(rs, QuantileBounds{5, 20});
  EXPECT_EQ(r.retained.size(), 5u);
  EXPECT_EQ(r.rejected.size(), 5u);
  for (const auto& k : r.retained) EXPECT_EQ(k.id.substr(0, 2), "ok");
}

TEST(Filter, CurationComputesBoundsPerLanguage) {
  std::vector<FunctionRecord> rs;
  for (int i = 1; i <= 10; ++i) {
    rs.push_back(rec("p" + std::to_string(i), std::string(static_cast<std::size_t>(i), 'a'), "def f(a):\n    return a\n"));
    rs.push_back(rec("j" + std::to_string(i), std::string(static_cast<std::size_t>(10 * i), 'b'),
                     "int f(int a) { a++; return a; }", Language::Java));
  }
  const auto cur = curate_records(rs);
  ASSERT_EQ(cur.bounds.size(), 2u);
  std::map<Language, QuantileBounds> b(cur.bounds.begin(), cur.bounds.end());
  EXPECT_EQ(b[Language::Python].low, 1u);
  EXPECT_EQ(b[Language::Python].high, 9u);
  EXPECT_EQ(b[Language::Java].low, 10u);
  EXPECT_EQ(b[Language::Java].high, 90u);
  EXPECT_EQ(cur.filtered.retained.size(), 16u);
}

// ---- Pairing and splitting -----------------------------------------------------

TEST(Pairing, MatchingIds) {
  std::vector<FunctionRecord> h, g;
  for (const char* id : {"a", "b", "c"}) {
    h.push_back(rec(id, "d", "c"));
    g.push_back(rec(id, "d", "c2", Language::Python, Origin::LLM));
  }
  const auto p = pair_records(h, g);
  EXPECT_EQ(p.pairs.size(), 3u);
  EXPECT_TRUE(p.unmatched_human.empty());
  EXPECT_EQ(p.pairs[1].pair_id, "b");
  EXPECT_EQ(p.pairs[1].generated.code, "c2");
}

TEST(Pairing, MissingGeneratedReported) {
  std::vector<FunctionRecord> h{rec("x", "d", "c"), rec("y", "d", "c"), rec("z", "d", "c")};
  std::vector<FunctionRecord> g{rec("y", "d", "c", Language::Python, Origin::LLM),
                                rec("z", "d", "c", Language::Python, Origin::LLM)};
  const auto p = pair_records(h, g);
  EXPECT_EQ(p.pairs.size(), 2u);
  EXPECT_EQ(p.unmatched_human, std::vector<std::string>{"x"});
}

TEST(Pairing, EmptyGenerated) {
  std::vector<FunctionRecord> h{rec("x", "d", "c"), rec("y", "d", "c")};
  const auto p = pair_records(h, {});
  EXPECT_TRUE(p.pairs.empty());
  EXPECT_EQ(p.unmatched_human.size(), 2u);
}

TEST(Pairing, DuplicateKeyThrows) {
  std::vector<FunctionRecord> h{rec("x", "d", "c"), rec("x", "d", "c")};
  EXPECT_THROW(pair_records(h, {}), ValidationError);
}

namespace {

std::vector<FunctionRecord> paired_corpus(std::size_t pairs) {
  std::vector<FunctionRecord> out;
  for (std::size_t i = 0; i < pairs; ++i) {
    out.push_back(rec("k" + std::to_string(i), "d", "c"));
    out.push_back(rec("k" + std::to_string(i), "d", "c", Language::Python, Origin::LLM));
  }
  return out;
}

std::array<std::size_t, 3> key_counts(const std::vector<FunctionRecord>& rs, const std::vector<Split>& s) {
  std::map<std::string, Split> seen;
  for (std::size_t i = 0; i < rs.size(); ++i) seen[rs[i].id] = s[i];
  std::array<std::size_t, 3> c{};
  for (const auto& [id, sp] : seen) ++c[static_cast<std::size_t>(sp)];
  return c;
}

}  // namespace

TEST(Split, ExactRatio) {
  const auto rs = paired_corpus(100);
  const auto s = split_dataset(rs, 1);
  EXPECT_EQ(key_counts(rs, s), (std::array<std::size_t, 3>{80, 10, 10}));
}

TEST(Split, RoundingWithinOne) {
  const auto rs = paired_corpus(101);
  const auto c = key_counts(rs, split_dataset(rs, 2));
  EXPECT_EQ(c[0] + c[1] + c[2], 101u);
  EXPECT_LE(std::abs(static_cast<double>(c[0]) - 80.8), 1.0);
  EXPECT_LE(std::abs(static_cast<double>(c[1]) - 10.1), 1.0);
  EXPECT_LE(std::abs(static_cast<double>(c[2]) - 10.1), 1.0);
  EXPECT_EQ(split_sizes(101), c);
}

TEST(Split, DeterministicAndPairsTogether) {
  const auto rs = paired_corpus(57);
  const auto a = split_dataset(rs, 9);
  EXPECT_EQ(a, split_dataset(rs, 9));
  EXPECT_NE(a, split_dataset(rs, 10));
  for (std::size_t i = 0; i < rs.size(); i += 2) EXPECT_EQ(a[i], a[i + 1]);
}

TEST(Split, TooFewKeysThrows) { EXPECT_THROW(split_dataset(paired_corpus(2), 1), ValidationError); }

TEST(Split, PerLanguageBuckets) {
  auto rs = paired_corpus(30);
  for (std::size_t i = 0; i < 20; ++i) {
    rs.push_back(rec("j" + std::to_string(i), "d", "c", Language::Java));
  }
  const auto s = split_per_language(rs, 4);
  std::array<std::size_t, 3> java{};
  for (std::size_t i = 60; i < rs.size(); ++i) ++java[static_cast<std::size_t>(s[i])];
  EXPECT_EQ(java, (std::array<std::size_t, 3>{16, 2, 2}));
  std::vector<FunctionRecord> py(rs.begin(), rs.begin() + 60);
  EXPECT_EQ(key_counts(py, std::vector<Split>(s.begin(), s.begin() + 60)),
            (std::array<std::size_t, 3>{24, 3, 3}));
}

// ---- Comment stripping ---------------------------------------------------------

TEST(StripComments, PythonTrailingComment) { EXPECT_EQ(strip_comments("x = 1  # note", Language::Python), "x = 1"); }

TEST(StripComments, JavaBlockAndLine) {
  const auto out = strip_comments("/* c */ int x; // t", Language::Java);
  EXPECT_EQ(out.substr(out.find_first_not_of(' ')), "int x;");
}

TEST(StripComments, StringsUntouched) {
  EXPECT_EQ(strip_comments("s = '# not a comment'", Language::Python), "s = '# not a comment'");
}

TEST(StripComments, KeepsTokenSeparation) {
  EXPECT_EQ(strip_comments("a = b/*x*/+c;", Language::Java), "a = b +c;");
  EXPECT_EQ(strip_comments("int/**/x;", Language::Java), "int x;");
}

TEST(StripComments, KeepsLineStructure) {
  const std::string code = "int f() {\n  /* a\n  b */\n  return 1;\n}\n";
  const auto out = strip_comments(code, Language::Java);
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), std::count(code.begin(), code.end(), '\n'));
}

TEST(StripComments, UnterminatedBlockCommentThrows) {
  EXPECT_THROW(strip_comments("int x; /* open", Language::Java), LexError);
}

TEST(StripComments, PropertiesOnRandomRecords) {
  for (const auto& r : provdet::testing::random_records(500, 21)) {
    SCOPED_TRACE(r.code);
    const auto once = strip_comments(r.code, r.language);
    EXPECT_EQ(strip_comments(once, r.language), once);
    EXPECT_EQ(token_count(once, r.language), token_count(r.code, r.language));
    EXPECT_LE(nloc(once, r.language), nloc(r.code, r.language));
    for (const auto& t : lex(once, r.language)) EXPECT_NE(t.kind, TokenKind::Comment);
  }
}

// ---- Filter properties ------------------------------------------------------------

TEST(Filter, IdempotentOnRandomRecords) {
  const auto rs = provdet::testing::random_records(600, 31);
  const auto first = filter_corpus(rs, QuantileBounds{10, 120});
  EXPECT_EQ(first.retained.size() + first.rejected.size(), rs.size());
  EXPECT_FALSE(first.retained.empty());
  EXPECT_FALSE(first.rejected.empty());
  const auto second = filter_corpus(first.retained, QuantileBounds{10, 120});
  EXPECT_EQ(second.retained, first.retained);
  EXPECT_TRUE(second.rejected.empty());
}

TEST(Filter, RuleOrderDoesNotMatter) {
  Rng rng(8);
  const auto rs = provdet::testing::random_records(500, 41);
  for (const auto& r : rs) {
    const auto base = apply_noise_filters(r);
    for (int k = 0; k < 3; ++k) {
      auto order = kAllNoiseRules;
      rng.shuffle(std::span<NoiseRule>(order));
      EXPECT_EQ(apply_noise_filters(r, {}, order).violated_rules, base.violated_rules);
    }
  }
}
