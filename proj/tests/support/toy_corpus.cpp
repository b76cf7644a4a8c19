#include "toy_corpus.hpp"

#include <array>
#include <cstdio>
#include <string>

#include "provdet/lexer.hpp"
#include "provdet/rng.hpp"

namespace provdet::testing {

namespace {

struct Topic {
  const char* verb;
  const char* noun;       // multi-word, space separated
  const char* container;  // parameter noun
  const char* item;       // element noun
};

constexpr std::array<const char*, 14> kVerbs = {
    "compute", "calculate", "collect", "count", "filter", "find", "gather",
    "merge", "normalize", "select", "summarize", "build", "extract", "measure"};

constexpr std::array<const char*, 16> kNouns = {
    "total price", "average score", "maximum value", "valid entries", "word frequency",
    "unique items", "even numbers", "order totals", "active sessions", "matching keys",
    "positive balances", "error counts", "user ages", "daily sales", "file sizes", "item weights"};

constexpr std::array<const char*, 8> kContainers = {"values", "records", "numbers", "entries",
                                                    "items", "scores", "amounts", "samples"};

constexpr std::array<const char*, 8> kItems = {"value", "record", "number", "entry",
                                               "item", "score", "amount", "sample"};

constexpr std::array<const char*, 10> kShortVars = {"x", "y", "v", "t", "tmp", "r", "acc", "n", "k", "s"};
constexpr std::array<const char*, 6> kShortParams = {"lst", "arr", "xs", "d", "a", "vals"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& pool, Rng& rng) {
  return pool[static_cast<std::size_t>(rng.below(N))];
}

std::string snake(std::string s) {
  for (auto& c : s) {
    if (c == ' ') c = '_';
  }
  return s;
}

// "average score" + "compute" -> "cmp_avg" style abbreviations.
std::string abbreviate(const std::string& verb, const std::string& noun, Rng& rng) {
  std::string out;
  const std::size_t keep = 2 + static_cast<std::size_t>(rng.below(2));
  out += verb.substr(0, keep);
  std::size_t start = 0;
  bool first = true;
  while (start < noun.size()) {
    std::size_t end = noun.find(' ', start);
    if (end == std::string::npos) end = noun.size();
    const std::string word = noun.substr(start, end - start);
    if (rng.below(2) == 0 || first) {
      out += rng.below(2) == 0 ? "_" : "";
      out += word.substr(0, rng.below(2) == 0 ? 1 : 3);
    }
    first = false;
    start = end + 1;
  }
  if (is_keyword(out, Language::Python)) out += "_";
  return out;
}

std::string llm_like(const Topic& t, Rng& rng) {
  const std::string name = std::string(t.verb) + "_" + snake(t.noun);
  const std::string param = std::string("input_") + t.container;
  const std::string elem = std::string("current_") + t.item;
  const std::string result = "result_" + snake(t.noun).substr(0, snake(t.noun).find('_'));
  std::string code = "def " + name + "(" + param + "):\n";
  switch (rng.below(3)) {
    case 0:
      code += "    " + result + " = 0\n";
      code += "    for " + elem + " in " + param + ":\n";
      code += "        " + result + " = " + result + " + " + elem + "\n";
      code += "    return " + result + "\n";
      break;
    case 1:
      code += "    " + result + " = [" + elem + " for " + elem + " in " + param + "]\n";
      code += "    return " + result + "\n";
      break;
    default:
      code += "    " + result + " = []\n";
      code += "    for " + elem + " in " + param + ":\n";
      code += "        if " + elem + " is not None:\n";
      code += "            " + result + ".append(" + elem + ")\n";
      code += "    return " + result + "\n";
      break;
  }
  return code;
}

std::string human_like(const Topic& t, Rng& rng) {
  const std::string name = abbreviate(t.verb, t.noun, rng);
  const std::string p = pick(kShortParams, rng);
  const std::string v = pick(kShortVars, rng);
  std::string r = pick(kShortVars, rng);
  if (r == v) r = "res";
  const int k = static_cast<int>(rng.below(9)) + 1;
  std::string code = "def " + name + "(" + p + ", lim=" + std::to_string(k) + "):\n";
  code += "    " + r + " = 0\n";
  code += "    for " + v + " in " + p + ":\n";
  const std::size_t decisions = 1 + static_cast<std::size_t>(rng.below(4));
  code += "        if " + v + " > lim:\n";
  code += "            " + r + " += " + v + "\n";
  for (std::size_t i = 1; i < decisions; ++i) {
    switch (rng.below(3)) {
      case 0:
        code += "        elif " + v + " < -lim and " + r + ":\n";
        code += "            " + r + " -= 1\n";
        break;
      case 1:
        code += "        if not " + v + " or " + r + " > 100:\n";
        code += "            break\n";
        break;
      default:
        code += "        while " + r + " > lim * 10:\n";
        code += "            " + r + " //= 2\n";
        break;
    }
  }
  code += "    return " + r + "\n";
  return code;
}

}  // namespace

std::vector<FunctionRecord> make_toy_corpus(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FunctionRecord> out;
  out.reserve(2 * pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t ci = static_cast<std::size_t>(rng.below(kContainers.size()));
    const Topic t{pick(kVerbs, rng), pick(kNouns, rng), kContainers[ci], kItems[ci]};
    char id[32];
    std::snprintf(id, sizeof id, "toy-%05zu", i);
    const std::string doc = std::string(t.verb) + " the " + t.noun + " of the given " + t.container + ".";
    out.push_back({id, Language::Python, doc, human_like(t, rng), Origin::Human, std::nullopt});
    out.push_back({id, Language::Python, doc, llm_like(t, rng), Origin::LLM, std::nullopt});
  }
  return out;
}

}  // namespace provdet::testing
