#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "provdet/lexer.hpp"
#include "provdet/vocab.hpp"
#include "random_records.hpp"

using namespace provdet;

namespace {

std::vector<Token> code_tokens(std::string_view code, Language lang) {
  std::vector<Token> out;
  for (auto& t : lex(code, lang)) {
    if (t.kind != TokenKind::Newline && t.kind != TokenKind::Indent) out.push_back(t);
  }
  return out;
}

// Every byte is either inside exactly one token or is skipped whitespace
// (Python also skips backslash continuations).
void expect_lossless(std::string_view code, Language lang) {
  const auto tokens = lex(code, lang);
  std::size_t pos = 0;
  std::size_t line = 1;
  for (const auto& t : tokens) {
    ASSERT_GE(t.offset, pos) << "overlapping tokens in: " << code;
    for (std::size_t i = pos; i < t.offset; ++i) {
      const char c = code[i];
      const bool skip = c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\n' ||
                        (lang == Language::Python && c == '\\');
      ASSERT_TRUE(skip) << "byte " << i << " not covered in: " << code;
    }
    ASSERT_EQ(code.substr(t.offset, t.text.size()), t.text);
    ASSERT_GE(t.line, line);
    line = t.line;
    pos = t.offset + t.text.size();
  }
  for (std::size_t i = pos; i < code.size(); ++i) {
    const char c = code[i];
    ASSERT_TRUE(c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f') << code;
  }
}

}  // namespace

TEST(Lexer, SimpleAssignment) {
  const auto t = code_tokens("x = 1", Language::Python);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].kind, TokenKind::Identifier);
  EXPECT_EQ(t[0].text, "x");
  EXPECT_EQ(t[1].kind, TokenKind::Operator);
  EXPECT_EQ(t[1].text, "=");
  EXPECT_EQ(t[2].kind, TokenKind::NumberLiteral);
  EXPECT_EQ(t[2].text, "1");
}

TEST(Lexer, HashInsideStringIsNotAComment) {
  const auto t = code_tokens("s = \"a # b\"", Language::Python);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[2].kind, TokenKind::StringLiteral);
  EXPECT_EQ(t[2].text, "\"a # b\"");
}

TEST(Lexer, JavaBlockComment) {
  const auto t = code_tokens("/* a */ x", Language::Java);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].kind, TokenKind::Comment);
  EXPECT_EQ(t[1].kind, TokenKind::Identifier);
  EXPECT_EQ(t[1].text, "x");
}

TEST(Lexer, KeywordsAreClassified) {
  const auto t = code_tokens("def f(): return None", Language::Python);
  EXPECT_EQ(t[0].kind, TokenKind::Keyword);
  EXPECT_EQ(t[1].kind, TokenKind::Identifier);
  EXPECT_TRUE(is_keyword("while", Language::Java));
  EXPECT_FALSE(is_keyword("def", Language::Java));
  EXPECT_TRUE(is_keyword("lambda", Language::Python));
}

TEST(Lexer, TripleQuotedStringSpansLines) {
  const auto t = code_tokens("x = '''a\n# b\n'''\ny", Language::Python);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[2].kind, TokenKind::StringLiteral);
  EXPECT_EQ(t[3].line, 4u);
}

TEST(Lexer, EscapedQuotesStayInString) {
  const auto t = code_tokens(R"(String s = "a\"b//c";)", Language::Java);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t[3].text, R"("a\"b//c")");
}

TEST(Lexer, UnterminatedStringReportsPosition) {
  try {
    lex("x = 1\ny = 'abc", Language::Python);
    FAIL() << "expected LexError";
  } catch (const LexError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 5u);
  }
}

TEST(Lexer, UnterminatedBlockCommentThrows) {
  EXPECT_THROW(lex("int x; /* open", Language::Java), LexError);
}

TEST(Lexer, LosslessCoverage) {
  expect_lossless("def f(a, b):\n    return a + \\\n        b  # sum\n", Language::Python);
  expect_lossless("int f() { /* c */ return 1 >>> 2; } // t\n", Language::Java);
  for (const auto& r : provdet::testing::random_records(300, 77)) {
    SCOPED_TRACE(r.code);
    expect_lossless(r.code, r.language);
  }
}

// ---- Vocabulary ------------------------------------------------------------

TEST(Vocab, FrequencyOrderedIds) {
  const std::vector<std::vector<std::string>> streams{token_strings("a a b", Language::Python, false)};
  const auto v = build_vocab(streams, 5);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id_of("a"), 3);
  EXPECT_EQ(v.id_of("b"), 4);
}

TEST(Vocab, EmptyCorpusHasOnlySpecials) {
  const auto v = build_vocab({}, 100);
  EXPECT_EQ(v.size(), kNumSpecials);
  EXPECT_EQ(v.id_of("anything"), kUnkId);
}

TEST(Vocab, TiesBreakLexicographically) {
  const std::vector<std::vector<std::string>> streams{{"y", "x"}};
  const auto v = build_vocab(streams, 10);
  EXPECT_EQ(v.id_of("x"), 3);
  EXPECT_EQ(v.id_of("y"), 4);
}

TEST(Vocab, MaxSizeBelowFourThrows) {
  EXPECT_THROW(build_vocab({}, 3), ValidationError);
}

TEST(Vocab, TruncatesToMaxSize) {
  const std::vector<std::vector<std::string>> streams{{"a", "a", "a", "b", "b", "c"}};
  const auto v = build_vocab(streams, 5);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_FALSE(v.contains("c"));
}

TEST(Vocab, Deterministic) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& r : provdet::testing::random_records(50, 3)) {
    streams.push_back(token_strings(r.code, r.language, true));
  }
  EXPECT_EQ(build_vocab(streams, 64), build_vocab(streams, 64));
}

TEST(Vocab, CommentsOptional) {
  const auto with = token_strings("x = 1  # hi", Language::Python, true);
  const auto without = token_strings("x = 1  # hi", Language::Python, false);
  EXPECT_EQ(without, (std::vector<std::string>{"x", "=", "1"}));
  EXPECT_EQ(with.size(), 4u);
}

TEST(Vocab, SaveLoadRoundTrip) {
  Vocabulary v;
  v.add("plain");
  v.add("tab\there");
  v.add("new\nline");
  v.add("back\\slash");
  std::stringstream ss;
  v.save(ss);
  const std::string text = ss.str();
  const auto loaded = Vocabulary::load(ss);
  EXPECT_EQ(loaded, v);
  EXPECT_EQ(loaded.fingerprint(), v.fingerprint());
  // three header lines, then one token per line
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n' ? 1 : 0;
  EXPECT_EQ(lines, v.size());
}

TEST(Encode, PrefixAndPadding) {
  Vocabulary v;
  v.add("a");
  v.add("b");
  EXPECT_EQ(encode("a b", Language::Python, v, 5), (std::vector<TokenId>{2, 3, 4, 0, 0}));
}

TEST(Encode, UnknownTokens) {
  Vocabulary v;
  v.add("a");
  EXPECT_EQ(encode("a z", Language::Python, v, 4), (std::vector<TokenId>{2, 3, 1, 0}));
}

TEST(Encode, TruncatesLongInput) {
  Vocabulary v;
  v.add("x");
  std::string code;
  for (int i = 0; i < 300; ++i) code += "x ";
  const auto ids = encode(code, Language::Python, v, 256);
  ASSERT_EQ(ids.size(), 256u);
  EXPECT_EQ(ids[0], kEncId);
  EXPECT_EQ(ids[255], 3);
}

TEST(Encode, AlwaysMaxLenWithEncPrefix) {
  Vocabulary v;
  for (const auto& r : provdet::testing::random_records(100, 9)) {
    const auto ids = encode(r.code, r.language, v, 16);
    ASSERT_EQ(ids.size(), 16u);
    EXPECT_EQ(ids[0], kEncId);
  }
}
